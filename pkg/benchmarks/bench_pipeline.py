"""Wall-clock timings of the main pipeline stages on the built-in models.

    python3 benchmarks/bench_pipeline.py [--threads T] [--repeat R]
"""

import argparse
import time

from blochframes.chern import compute_invariants
from blochframes.frames import frame_nd, parseval_frame
from blochframes.kgrid import KGrid
from blochframes.models import build_projector_field, builtin
from blochframes.verifysuite import check_3deg_equals_minus_c2

# (model, params, invariant grid, frame grid)
CASES = [
    ("qwz", {"u": 1.0}, 40, 32),
    ("weak3d", {"u": 1.0}, 16, 16),
    ("weak4d", {"u": 1.0}, 16, 16),
    ("dirac4d", {}, 12, 10),
]


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"{'model':<16}{'n':>4}{'projectors':>12}{'invariants':>12}{'n_frame':>9}{'frame':>8}{'parseval':>10}")
    for name, params, n, n_frame in CASES:
        model = builtin(name, params)
        grid = KGrid(model.dim, n)
        t_proj, (pf, gap) = timed(lambda: build_projector_field(model, grid, args.threads), args.repeat)
        t_inv, _ = timed(lambda: compute_invariants(pf, gap), args.repeat)
        small = build_projector_field(model, KGrid(model.dim, n_frame), args.threads)[0]
        t_frame, _ = timed(lambda: frame_nd(small), 1)
        t_pars, _ = timed(lambda: parseval_frame(small), 1)
        label = name + "".join(f" {k}={v:g}" for k, v in params.items())
        print(f"{label:<16}{n:>4}{t_proj:>12.3f}{t_inv:>12.3f}{n_frame:>9}{t_frame:>8.2f}{t_pars:>10.2f}")

    t_deg, res = timed(lambda: check_3deg_equals_minus_c2(builtin("dirac4d"), 12), 1)
    print(f"\n3-degree vs c2 on dirac4d n=12: {t_deg:.2f} s ({'pass' if res.passed else 'fail'})")


if __name__ == "__main__":
    main()
