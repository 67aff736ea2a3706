"""Smoke test for the isovol extension module.

Build and install first:  maturin develop --release -m crates/python/Cargo.toml
"""

import json
import math

import isovol


def main():
    print("isovol", isovol.__version__)

    cp1, _ = isovol.volume("cp", k=1, n=2)
    rp2, _ = isovol.volume("rp", k=2, n=2)
    print(f"vol(CP^1) = {cp1:.6f}, vol(RP^2) = {rp2:.6f}")
    assert abs(cp1 - math.pi) < 1e-3 * math.pi
    assert abs(rp2 - 2 * math.pi) < 2e-3 * math.pi
    assert cp1 < rp2

    est = isovol.mc_expected_count(1, 3, 2000, 42)
    print(est, est.volume())
    assert set(est.histogram) == {1}

    cubic = {"n": 3, "polys": [{"coeffs": [{"c": 1.0, "e": [3, 0, 0, 0]}, {"c": 1.0, "e": [0, 3, 0, 0]},
                                           {"c": 1.0, "e": [0, 0, 3, 0]}, {"c": 1.0, "e": [0, 0, 0, 3]}]}]}
    est = isovol.mc_expected_count(1, 3, 5000, 42, locus_json=json.dumps(cubic))
    print("Fermat cubic counts", est.histogram, "bound", isovol.bezout_bound(json.dumps(cubic)))
    assert set(est.histogram) <= {1, 3}

    sigma = isovol.estimate_sigma(1, 2, 2000, 5, 7)
    print(sigma)
    assert sigma.plane_choice_spread / sigma.mean_wedge < 0.05

    s, base, wallis = isovol.suspension_volume(1)
    print(f"vol(suspension of S^1) = {s:.6f}, ratio {s / base:.6f}, Wallis {wallis}")
    assert abs(s - 4 * math.pi) < 4e-3 * math.pi

    run = isovol.integrate_flow(isovol.HamiltonianSpec.builtin("monomial_quartic"), mesh_scale=16)
    print(run)
    assert run.minimization_holds
    assert min(run.projected_volumes) >= math.pi * (1 - 1e-3)

    print("ok")


if __name__ == "__main__":
    main()
