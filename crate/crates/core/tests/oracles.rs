//! Derived constants checked against independent computations.

use std::f64::consts::PI;

use proptest::prelude::*;

use isovol::crofton::{closed_form_volumes, BodyKind};
use isovol::haar::sample_unitary;
use isovol::hamflow::{integrate_flow, FlowConfig, Hamiltonian, HamiltonianSpec};
use isovol::intersect::count_real_projective_roots;
use isovol::numeric::wallis_integral;
use isovol::polynomial::BinaryForm;
use isovol::projective::{fs_distance, ProjPoint};
use isovol::submanifolds::{clifford_torus, round_sphere};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// vol(S^k) from the recurrence vol(S^k) = 2π/(k−1) · vol(S^{k−2}).
fn sphere_by_recurrence(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_by_recurrence(k - 2),
    }
}

/// Composite Simpson rule on [0, π].
fn simpson_sin_power(k: i32, panels: usize) -> f64 {
    let h = PI / panels as f64;
    let f = |x: f64| x.sin().powi(k);
    let mut s = f(0.0) + f(PI);
    for i in 1..panels {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn closed_forms_match_recurrences() {
    for k in 1..=8 {
        let s = sphere_by_recurrence(k);
        assert!(rel(closed_form_volumes(BodyKind::Sphere, k).unwrap(), s) < 1e-14);
        assert!(rel(closed_form_volumes(BodyKind::Rp, k).unwrap(), s / 2.0) < 1e-14);
    }
    // CP^k is the quotient of S^{2k+1} by circles of length 2π
    for k in 1..=4 {
        let cp = closed_form_volumes(BodyKind::Cp, k).unwrap();
        assert!(rel(cp, sphere_by_recurrence(2 * k + 1) / (2.0 * PI)) < 1e-14);
    }
}

#[test]
fn wallis_factors_match_simpson() {
    for k in 0..=7 {
        assert!((wallis_integral(k) - simpson_sin_power(k as i32, 2000)).abs() < 1e-10, "k={k}");
    }
    assert_eq!(wallis_integral(1), 2.0);
    assert!((wallis_integral(3) - 4.0 / 3.0).abs() < 1e-15);
}

/// The Clifford torus lifts to a product of circles of radius (n+1)^{−1/2} in
/// S^{2n+1}; dividing by the fiber length 2π gives (2π)^n / (n+1)^{(n+1)/2}.
#[test]
fn clifford_torus_volume() {
    for n in 1..=3 {
        let expected = (2.0 * PI).powi(n as i32) / ((n + 1) as f64).powf((n + 1) as f64 / 2.0);
        let v = clifford_torus(n).unwrap().volume().unwrap().value;
        assert!(rel(v, expected) < 1e-8, "n={n}: {v} vs {expected}");
    }
}

/// |U_00|^2 of a Haar unitary in U(N) is Beta(1, N−1): mean 1/N, second moment 2/(N(N+1)).
#[test]
fn haar_entry_moments() {
    for dim in [2usize, 3, 5] {
        let samples = 40_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..samples {
            let g = sample_unitary(dim, 17, i as u64).unwrap();
            let p = g.matrix()[(0, 0)].norm_sqr();
            m1 += p;
            m2 += p * p;
        }
        m1 /= samples as f64;
        m2 /= samples as f64;
        let n = dim as f64;
        let var1 = 1.0 / (n * (n + 1.0)) * 2.0 - 1.0 / (n * n);
        let se = (var1 / samples as f64).sqrt();
        assert!((m1 - 1.0 / n).abs() < 5.0 * se, "dim {dim}: {m1}");
        assert!(rel(m2, 2.0 / (n * (n + 1.0))) < 0.03, "dim {dim}: {m2}");
    }
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    /// Forms built from known root angles and definite quadratic factors.
    #[test]
    fn constructed_root_counts(
        angles in prop::collection::btree_set(0usize..20, 0..5),
        quads in prop::collection::vec((-1.0f64..1.0, 0.5f64..2.0), 0..3),
        scale in 0.1f64..10.0,
    ) {
        prop_assume!(!angles.is_empty() || !quads.is_empty());
        let mut form = vec![scale];
        for &a in &angles {
            // root at [s : t] = [cos θ : sin θ], θ on a grid 9° apart
            let theta = a as f64 * PI / 20.0 + 0.01;
            form = multiply(&form, &[-theta.sin(), theta.cos()]);
        }
        for &(b, c) in &quads {
            // t^2 + b s t + c s^2 with b^2 < 4c has no real roots
            prop_assume!(b * b < 3.0 * c);
            form = multiply(&form, &[1.0, b, c]);
        }
        let degree = form.len() - 1;
        let r = count_real_projective_roots(&BinaryForm::new(form)).unwrap();
        // the count is exact either way; the discriminant flag is only
        // guaranteed clear at low degree, where it is not dominated by size
        prop_assert_eq!(r.count, angles.len());
        if degree <= 4 {
            prop_assert!(r.transversal, "condition {}", r.condition);
        }
    }
}

#[test]
fn root_at_infinity_is_counted() {
    // s · t · (s − 2t): roots [0:1], [1:0], [2:1]
    let r = count_real_projective_roots(&BinaryForm::new(vec![0.0, -2.0, 1.0])).unwrap();
    assert_eq!((r.count, r.transversal), (2, true));
    let r = count_real_projective_roots(&BinaryForm::new(vec![0.0, -2.0, 1.0, 0.0])).unwrap();
    assert_eq!((r.count, r.transversal), (3, true));
}

/// A Hermitian flow acts by a unitary, so it preserves every pairwise distance.
#[test]
fn hermitian_flow_is_an_isometry() {
    let spec = HamiltonianSpec::hermitian(
        vec![vec![0.5, 0.1, 0.0], vec![0.1, -0.2, 0.3], vec![0.0, 0.3, 0.0]],
        Some(vec![vec![0.0, 0.2, -0.1], vec![-0.2, 0.0, 0.0], vec![0.1, 0.0, 0.0]]),
    );
    let h = Hamiltonian::new(&spec, 2).unwrap();
    let cfg = FlowConfig {
        t_max: 1.0,
        dt: 1e-2,
        checkpoints: 2,
        mesh_scale: 2,
    };
    let states = integrate_flow(&round_sphere(1, 2).unwrap(), &h, &cfg).unwrap();
    let pts = |i: usize| -> Vec<ProjPoint> {
        states[i].mesh.points().iter().map(|p| ProjPoint::new(p.clone()).unwrap()).collect()
    };
    let (a, b) = (pts(0), pts(2));
    for i in (0..a.len()).step_by(3) {
        for j in (i + 1..a.len()).step_by(5) {
            let d0 = fs_distance(&a[i], &a[j]).unwrap();
            let d1 = fs_distance(&b[i], &b[j]).unwrap();
            assert!((d0 - d1).abs() < 1e-9, "{d0} vs {d1}");
        }
    }
}
