"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is compiled once (warm-up) before timing.  Both backends are
also checked to agree before anything is timed.
"""

import argparse
import time

import numpy as np

from angular_metric import _accel, _kernels
from angular_metric.evaluation import _kmeanspp
from angular_metric.sampling import make_rng


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    X = rng.standard_normal((128, 64)) / 8.0
    labels = np.repeat(np.arange(64), 2)
    partner = np.arange(128) ^ 1
    E = rng.standard_normal((2000, 16))
    elab = rng.integers(0, 100, size=2000)
    C0 = _kmeanspp(E, 100, make_rng(1))
    return {
        "tuplet_lse  N=128 D=64": lambda: _kernels.tuplet_lse(X, partner, labels, 4.0, 4.0, -4.0),
        "tuplet_hinge N=128 D=64": lambda: _kernels.tuplet_hinge(X, partner, labels, 0.1),
        "first_hit_rank N=2000 D=16": lambda: _kernels.first_hit_rank(E, elab),
        "lloyd N=2000 k=100 D=16": lambda: _kernels.lloyd(E, C0, 300, 1e-6),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can run")
    rows = []
    for name, fn in cases(make_rng(0)).items():
        _accel.USE_NUMBA = False
        ref = fn()
        t_np = _time(fn, args.repeat)
        t_nb = np.nan
        if _accel.HAVE_NUMBA:
            _accel.USE_NUMBA = True
            got = fn()  # compiles
            ref_t = ref if isinstance(ref, tuple) else (ref,)
            got_t = got if isinstance(got, tuple) else (got,)
            for a, b in zip(ref_t, got_t):
                np.testing.assert_allclose(np.asarray(a, float), np.asarray(b, float), rtol=1e-9, atol=1e-12)
            t_nb = _time(fn, args.repeat)
        rows.append((name, t_np, t_nb))
    print(f"{'kernel':30s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for name, t_np, t_nb in rows:
        print(f"{name:30s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
