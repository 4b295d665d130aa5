import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stitchfuzz.spec_model import parse_spec

# A: () -> Doc; B: (Doc) -> (Doc, Elem); C: (Doc, Elem) -> ()
TINY_DOC = {
    "types": ["Doc", "Elem"],
    "blocks": [
        {
            "name": "A",
            "code": "cover 1\nemit 0 new\n",
            "inputs": [],
            "outputs": [{"name": "doc", "type": "Doc"}],
        },
        {
            "name": "B",
            "code": "cover 2\nemit 0 passthrough 0\nemit 1 new\n",
            "inputs": [{"name": "doc", "type": "Doc"}],
            "outputs": [
                {"name": "doc", "type": "Doc"},
                {"name": "el", "type": "Elem"},
            ],
        },
        {
            "name": "C",
            "code": "cover 3\n",
            "inputs": [
                {"name": "doc", "type": "Doc"},
                {"name": "el", "type": "Elem"},
            ],
            "outputs": [],
        },
    ],
    "revision": 1,
}


@pytest.fixture
def tiny_spec():
    return parse_spec(json.dumps(TINY_DOC))


@pytest.fixture
def tiny_doc():
    return json.loads(json.dumps(TINY_DOC))
