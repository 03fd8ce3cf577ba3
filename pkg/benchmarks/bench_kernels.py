"""Benchmark the compiled recursion kernels against the pure-Python fallback.

Run with:  python3 benchmarks/bench_kernels.py [n]
"""

import sys
import timeit

import numpy as np

from vhsvar.kernels import _ref

try:
    from vhsvar.kernels import _core
except ImportError:
    _core = None


def bench(label, fn, *args, repeat=5, number=20):
    best = min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number))
    per_call = best / number
    print(f"  {label:<28s} {per_call * 1e3:9.3f} ms/call")
    return per_call


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
    rng = np.random.default_rng(0)
    eps = np.ascontiguousarray(rng.standard_normal(n))
    e1 = np.ascontiguousarray(rng.standard_normal(n))
    e2 = np.ascontiguousarray(0.7 * e1 + 0.3 * rng.standard_normal(n))
    d0 = np.zeros(3)

    backends = [("python", _ref)]
    if _core is not None:
        backends.insert(0, ("compiled", _core))
    else:
        print("compiled backend unavailable; benchmarking fallback only")

    results = {}
    print(f"n = {n}")
    for name, mod in backends:
        print(f"{name}:")
        results[name, "filter"] = bench(
            "garch_filter", mod.garch_filter, eps, 0.5, 0.09, 0.87, 1.0
        )
        results[name, "derivs"] = bench(
            "garch_filter_derivs",
            mod.garch_filter_derivs, eps, 0.5, 0.09, 0.87, 1.0, d0,
        )
        results[name, "cdcc"] = bench(
            "cdcc_corr_filter", mod.cdcc_corr_filter, e1, e2, 0.7, 0.04, 0.95
        )

    if _core is not None:
        print("speedup (python / compiled):")
        for key in ("filter", "derivs", "cdcc"):
            ratio = results["python", key] / results["compiled", key]
            print(f"  {key:<28s} {ratio:9.1f}x")

        # agreement check while we are here
        ok = np.allclose(
            _core.garch_filter(eps, 0.5, 0.09, 0.87, 1.0),
            _ref.garch_filter(eps, 0.5, 0.09, 0.87, 1.0),
            rtol=1e-12, atol=1e-12,
        )
        print(f"  garch_filter backends agree: {ok}")
        rho_a, nll_a = _core.cdcc_corr_filter(e1, e2, 0.7, 0.04, 0.95)
        rho_b, nll_b = _ref.cdcc_corr_filter(e1, e2, 0.7, 0.04, 0.95)
        ok = np.allclose(rho_a, rho_b, rtol=1e-12) and abs(nll_a - nll_b) < 1e-8
        print(f"  cdcc_corr_filter backends agree: {ok}")


if __name__ == "__main__":
    main()
