"""Time the compiled and NumPy kernel backends against each other.

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 5]

Each kernel is run on identical inputs under both backends; results are
checked for agreement before timings are reported.
"""

import argparse
import timeit

import numpy as np

from wiscore import kernels
from wiscore.distributions import NegBinParams, negbin_quantile, tabulate
from wiscore.scores_quantile import HUB_LEVELS


def wis_inputs(n, rng):
    alphas = np.array(HUB_LEVELS.alphas)
    params = NegBinParams(60, 4)
    lo = np.array([negbin_quantile(params, a / 2) for a in alphas], dtype=float)
    hi = np.array([negbin_quantile(params, 1 - a / 2) for a in alphas], dtype=float)
    shift = rng.normal(0, 20, size=(n, 1))
    lower, upper = lo + shift, hi + shift
    median = negbin_quantile(params, 0.5) + shift[:, 0]
    y = rng.negative_binomial(params.psi, params.prob, size=n).astype(float)
    return lower, upper, median, y, alphas, alphas / 2, 0.5


def crps_inputs(n, rng):
    params = NegBinParams(60, 4)
    t = tabulate(params)
    ys = rng.integers(0, 400, size=n)
    return t.probs, t.support_offset, ys


def bench(label, fn, impls, repeat, number):
    results = {name: fn(impl) for name, impl in impls.items()}
    ref = results["python"]
    for name, res in results.items():
        np.testing.assert_allclose(np.asarray(res, dtype=float), np.asarray(ref, dtype=float), rtol=1e-12, atol=1e-9)
    times = {name: min(timeit.repeat(lambda: fn(impl), repeat=repeat, number=number)) / number for name, impl in impls.items()}
    line = f"{label:<40}" + "".join(f"{name:>8}: {t * 1e3:9.3f} ms" for name, t in times.items())
    if "cython" in times:
        line += f"   speedup x{times['python'] / times['cython']:.1f}"
    print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    impls = {"python": kernels.get_impl("python")}
    try:
        impls["cython"] = kernels.get_impl("cython")
    except ImportError:
        print("compiled extension not built; timing the NumPy backend only")
    print(f"active backend: {kernels.BACKEND}")

    rng = np.random.default_rng(args.seed)
    w = wis_inputs(args.n, rng)
    bench(f"wis_components n={args.n} K=11", lambda impl: np.stack(kernels.wis_components(*w, impl=impl)), impls, args.repeat, 1)
    bench(
        f"wis_components n={args.n} K=11 no median",
        lambda impl: np.stack(kernels.wis_components(w[0], w[1], None, *w[3:], impl=impl)),
        impls, args.repeat, 1,
    )

    probs, offset, ys = crps_inputs(args.n // 10, rng)
    bench(f"crps_step_sum_many n={len(ys)}", lambda impl: kernels.crps_step_sum_many(probs, offset, ys, impl=impl), impls, args.repeat, 1)
    bench("crps_step_sum single y=190", lambda impl: kernels.crps_step_sum(probs, offset, 190, impl=impl), impls, args.repeat, 200)


if __name__ == "__main__":
    main()
