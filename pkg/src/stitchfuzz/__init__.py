"""stitchfuzz: coverage-guided fuzzing by stitching typed code blocks."""

__version__ = "0.1.0"

from .spec_model import Specification, parse_spec, load_spec  # noqa: F401
from .testcase import BlockInstance, ParamValue, Testcase, validate  # noqa: F401
from .virtual_backend import Outcome, OutcomeKind, VirtualBackend  # noqa: F401
from .engine import EngineConfig, run_campaign  # noqa: F401
