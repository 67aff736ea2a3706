use std::f64::consts::PI;

use proptest::prelude::*;

use isovol::crofton::{crofton_volume, mc_expected_count, CountableBody};
use isovol::haar::sample_unitary;
use isovol::numeric::wallis_integral;
use isovol::polynomial::{HomogeneousPoly, ImplicitRealLocus, Monomial};
use isovol::projective::{CVec, C64};
use isovol::submanifolds::{coordinate_cp, geodesic_rp, hopf_fiber, round_sphere, suspend};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Every exponent vector of total degree `d` in `nvars` variables.
fn monomials(nvars: usize, d: u32) -> Vec<Vec<u32>> {
    if nvars == 1 {
        return vec![vec![d]];
    }
    (0..=d)
        .flat_map(|first| {
            monomials(nvars - 1, d - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn random_form(nvars: usize, d: u32, coeffs: &[f64]) -> HomogeneousPoly {
    let terms = monomials(nvars, d)
        .into_iter()
        .zip(coeffs)
        .map(|(exponents, &coeff)| Monomial { coeff, exponents })
        .collect();
    HomogeneousPoly::new(terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn volume_is_unitarily_invariant(seed in 0u64..1000, k in 1usize..=2) {
        let g = sample_unitary(k + 2, seed, 0).unwrap();
        for body in [geodesic_rp(k, k + 1).unwrap(), coordinate_cp(1, k + 1).unwrap()] {
            let v0 = body.volume().unwrap().value;
            let v1 = body.transformed(&g).unwrap().volume().unwrap().value;
            prop_assert!(rel(v0, v1) < 1e-8, "{v0} vs {v1}");
        }
    }

    #[test]
    fn splitting_a_chart_keeps_volume(k in 1usize..=3, axis_pick in 0usize..3) {
        let body = geodesic_rp(k, k).unwrap();
        let axis = axis_pick % k;
        let whole = body.volume().unwrap();
        let split = body.split_chart(0, axis).volume().unwrap();
        prop_assert!((whole.value - split.value).abs() <= whole.error + split.error);
    }

    #[test]
    fn suspension_identity_on_sampled_bodies(seed in 0u64..1000, dim in 1usize..=2) {
        // a round sphere moved by a random unitary, and a Hopf fiber
        let g = sample_unitary(dim + 2, seed, 1).unwrap();
        let base = round_sphere(dim, dim + 1).unwrap().transformed(&g).unwrap();
        let fiber = hopf_fiber(&g.column(0)).unwrap();
        for s in [base, fiber] {
            let d = s.dim();
            let v = s.volume().unwrap();
            let sv = suspend(&s).unwrap().volume().unwrap();
            let expected = v.value * wallis_integral(d);
            let tol = sv.error + v.error * wallis_integral(d);
            prop_assert!((sv.value - expected).abs() <= tol, "{} vs {expected} (tol {tol})", sv.value);
        }
    }

    /// Counts against odd-degree hypersurfaces lie in [1, d] and share the parity of d.
    #[test]
    fn odd_degree_counts_are_bounded_with_parity(
        seed in 0u64..10_000,
        coeffs in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let f = random_form(4, 3, &coeffs);
        let locus = ImplicitRealLocus::hypersurface(f).unwrap();
        let est = mc_expected_count(&CountableBody::Hypersurface(locus), 1, 3, 200, seed).unwrap();
        for &count in est.histogram.keys() {
            prop_assert!((1..=3).contains(&count) && count % 2 == 1, "{:?}", est.histogram);
        }
        prop_assert!(est.mean_count >= 1.0);
        let v = crofton_volume(&est, 1, 3).unwrap();
        prop_assert!(v.value <= 3.0 * 2.0 * PI + 3.0 * est.stderr * 2.0 * PI);
    }
}

#[test]
fn sphere_lift_double_covers_rp() {
    for k in 1..=3 {
        for n in [k, k + 1] {
            let sphere = round_sphere(k, n).unwrap().with_resolution_scale(2).volume().unwrap().value;
            let rp = geodesic_rp(k, n).unwrap().with_resolution_scale(2).volume().unwrap().value;
            assert!(rel(sphere, 2.0 * rp) < 1e-8, "k={k} n={n}: {sphere} vs 2 × {rp}");
        }
    }
}

#[test]
fn quintic_counts_have_odd_parity() {
    let coeffs: Vec<f64> = (0..56).map(|i| ((i * 37 % 23) as f64 - 11.0) / 11.0).collect();
    let locus = ImplicitRealLocus::hypersurface(random_form(4, 5, &coeffs)).unwrap();
    let est = mc_expected_count(&CountableBody::Hypersurface(locus), 1, 3, 2000, 5).unwrap();
    assert!(est.histogram.keys().all(|c| c % 2 == 1 && *c <= 5), "{:?}", est.histogram);
}

#[test]
fn crofton_estimate_is_independent_of_thread_count() {
    let locus = ImplicitRealLocus::hypersurface(HomogeneousPoly::fermat(4, 3)).unwrap();
    let body = CountableBody::Hypersurface(locus);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_expected_count(&body, 1, 3, 5000, 99).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(7));
    assert_eq!(one.mean_count.to_bits(), run(5).mean_count.to_bits());
}

#[test]
fn hopf_fiber_is_a_great_circle() {
    let phase = C64::from_polar(1.0, 0.7);
    let x = CVec::new(vec![phase, C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
    let fiber = hopf_fiber(&x).unwrap().volume().unwrap().value;
    assert!(rel(fiber, 2.0 * PI) < 1e-10);
}
