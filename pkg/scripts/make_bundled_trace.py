"""Regenerate the SDL trace shipped for ``asrga check rate``."""

from pathlib import Path

from asrga.bench import SyntheticKind, SyntheticSpec, generate, metric_for, write_trace
from asrga.checks import BUNDLED_TRACE, BUNDLED_TRACE_P
from asrga.composite import build_problem
from asrga.solvers import AsrgaConfig, run_asrga


def main():
    inst = generate(SyntheticSpec(SyntheticKind.SDL_BERNOULLI_GAUSSIAN, n=10, seed=0))
    prob = build_problem(inst, BUNDLED_TRACE_P)
    res = run_asrga(prob, AsrgaConfig(max_iters=1000, seed=0), metric=metric_for(inst))
    out = Path(__file__).resolve().parents[1] / "src" / "asrga" / "data" / BUNDLED_TRACE
    write_trace(out, res.trace)
    print(f"wrote {out} ({len(res.trace)} rows)")


if __name__ == "__main__":
    main()
