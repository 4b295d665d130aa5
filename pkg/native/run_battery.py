#!/usr/bin/env python3
"""Twin-model consistency battery: virtual vs native outcomes.

Generates well-formed testcases over the twin spec (block indices 0-5 match
the native spec), executes each on both the virtual backend and the compiled
harness, and requires agreement on outcome kind and bail index. Testcases
whose virtual outcome is a crash are excluded (native undefined behavior may
diverge there); everything else must agree exactly.
"""

import argparse
import random
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "src"))

from stitchfuzz.errors import NoConstructableSeed  # noqa: E402
from stitchfuzz.mutation import MutationContext, mutate_params, regenerate  # noqa: E402
from stitchfuzz.native_codegen import run_native  # noqa: E402
from stitchfuzz.spec_model import load_spec  # noqa: E402
from stitchfuzz.virtual_backend import OutcomeKind, VirtualBackend  # noqa: E402


def generate_battery(twin, virtual, count: int, seed: int):
    rng = random.Random(seed)
    ctx = MutationContext(rng=rng, hints=twin.hints)
    battery = []
    while len(battery) < count:
        try:
            t = regenerate(
                twin, ctx, seed_block=rng.randrange(len(twin.blocks))
            ).testcase
        except NoConstructableSeed:
            continue
        if rng.random() < 0.5 and any(i.params for i in t.instances):
            t = mutate_params(twin, ctx, t).testcase
        v_out = virtual.execute(t)
        if v_out.kind == OutcomeKind.CRASH:
            continue  # native UB may diverge; excluded from the battery
        battery.append((t, v_out))
    return battery


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("build_dir", type=Path)
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    build = args.build_dir
    twin = load_spec(build / "twin_spec.json")
    virtual = VirtualBackend(twin, base_dir=str(build))
    harness = str(build / "harness")

    battery = generate_battery(twin, virtual, args.count, args.seed)
    mismatches = 0
    bails = 0
    for i, (t, v_out) in enumerate(battery):
        n_out = run_native(harness, t)
        same_kind = n_out.kind == v_out.kind
        same_index = v_out.kind != OutcomeKind.BAIL or n_out.index == v_out.index
        if not (same_kind and same_index):
            mismatches += 1
            print(
                f"  mismatch on case {i}: virtual {v_out.summary()} "
                f"native {n_out.summary()}"
            )
        if v_out.kind == OutcomeKind.BAIL:
            bails += 1
    agreement = len(battery) - mismatches
    print(
        f"battery: {agreement}/{len(battery)} agree "
        f"({bails} bail cases, {len(battery) - bails} completed cases)"
    )
    return 0 if mismatches == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
