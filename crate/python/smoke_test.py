"""Smoke test for the hyperkernel extension module.

Build and install first, e.g. ``maturin develop -m crates/py/Cargo.toml``.
"""

import math
import sys

import hyperkernel as hk


def check(name, ok, detail=""):
    print(("ok   " if ok else "FAIL ") + name + (f": {detail}" if detail else ""))
    return ok


def main():
    results = []

    # Points of H^2 on the first-model hyperboloid.
    pts = []
    for h in [(0.0, 0.0), (0.8, -0.3), (-1.2, 0.5), (0.4, 1.6)]:
        pts.append([math.sqrt(1 + h[0] ** 2 + h[1] ** 2), *h])
    k = hk.Kernel.from_points(pts)
    report = k.validate(all_basepoints=True)
    results.append(check("point kernel validates", report["valid"]))

    emb = k.embed()
    k2 = hk.Kernel.from_points(emb["points"])
    err = max(abs(a - b) for ra, rb in zip(k.matrix(), k2.matrix()) for a, b in zip(ra, rb))
    results.append(check("embedding round trip", err < 1e-9, f"{err:.2e}"))

    results.append(check("square root stays a kernel", k.power(0.5).validate()["valid"]))

    bad = hk.search_power_counterexample(2.0)
    results.append(check("square can fail", bad is not None and not bad.power(2.0).validate()["valid"]))
    try:
        bad.power(2.0).embed()
        results.append(check("embedding a non-kernel raises", False))
    except hk.NotAKernelError:
        results.append(check("embedding a non-kernel raises", True))

    g = hk.LorentzMap.translation(0.7)
    c = g.classify(base=[math.cosh(0.5), 0.0, math.sinh(0.5)])
    results.append(check("translation is hyperbolic", c["class"]["kind"] == "hyperbolic"
                         and abs(c["class"]["length"] - 0.7) < 1e-6, f"{c['class']['length']:.9f}"))
    results.append(check("inverse composes to identity", g.compose(g.inverse()).drift() < 1e-12))

    b = hk.beta_n(1.0, 0.5, 1000)
    results.append(check("beta_n near cosh^t", abs(b - hk.cosh_power(1.0, 0.5)) < 1e-3, f"{b:.12f}"))
    results.append(check("change of variables", abs(b - hk.beta_n_pre(1.0, 0.5, 1000)) < 1e-8))
    gap = hk.snowflake_gap(50.0, 0.5)
    results.append(check("snowflake gap", 0 <= gap <= 0.5 * math.log(2)))

    exp = g.orbit_experiment([1.0, 0.0, 0.0], 0.6)
    results.append(check("orbit experiment recovers t", abs(exp["recovered_t"] - 0.6) < 1e-6,
                         f"{exp['recovered_t']:.9f}"))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
