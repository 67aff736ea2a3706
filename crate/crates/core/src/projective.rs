//! Complex vectors, points of CP^n and the Hopf-lift structure on S^{2n+1}.
//!
//! Conventions: `⟨a, b⟩ = Σ conj(a_j) b_j`. The real (Euclidean) inner product
//! on C^{n+1} = R^{2n+2} is `Re⟨a, b⟩`. The circle action on the sphere is
//! generated by `u = i·x`, the contact form is `α_x(v) = Re⟨i·x, v⟩` and the
//! Kähler form is `ω(v, w) = Re⟨i·v, w⟩ = Im⟨v, w⟩`, normalised so that
//! `ω(v, i·v) = |v|²`. With these choices `dα = 2ω`.
//!
//! CP^n carries the Fubini–Study metric that makes the Hopf map
//! S^{2n+1} → CP^n a Riemannian submersion (fibres have length 2π).

use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for "on the unit sphere" checks at API boundaries.
pub const UNIT_TOL: f64 = 1e-10;

/// Phase convention threshold: the first entry with modulus above this is made real positive.
const PHASE_EPS: f64 = 1e-12;

/// A vector of C^{n+1}, n ≥ 1, with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "complex vectors need at least 2 entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(Self(entries))
    }

    /// Builds from `(re, im)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(re, im)| C64::new(re, im)).collect())
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<C64>) -> Self {
        debug_assert!(entries.len() >= 2);
        Self(entries)
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 2, "complex vectors need at least 2 entries");
        Self(vec![C64::new(0.0, 0.0); len])
    }

    /// The coordinate vector `e_k` of C^len.
    pub fn basis(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Complex dimension n of the projective space this vector represents a point of.
    pub fn projective_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    /// Hermitian product `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn hdot(&self, other: &CVec) -> C64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
    }

    /// Euclidean inner product of the underlying real vectors.
    pub fn real_dot(&self, other: &CVec) -> f64 {
        self.hdot(other).re
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * c).collect())
    }

    pub fn scale_real(&self, c: f64) -> CVec {
        CVec(self.0.iter().map(|z| z * c).collect())
    }

    pub fn mul_i(&self) -> CVec {
        CVec(self.0.iter().map(|z| C64::new(-z.im, z.re)).collect())
    }

    /// `self + c·other`, in place.
    pub fn axpy(&mut self, c: C64, other: &CVec) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn normalized(&self) -> Result<CVec> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        Ok(self.scale_real(1.0 / n))
    }

    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Real coordinates `(Re z_0, …, Re z_n, Im z_0, …, Im z_n)`.
    pub fn realify(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).chain(self.0.iter().map(|z| z.im)).collect()
    }

    pub fn check_unit(&self) -> Result<()> {
        let drift = self.norm() - 1.0;
        if drift.abs() > UNIT_TOL {
            return Err(Error::NotUnit(drift));
        }
        Ok(())
    }

    /// Appends a coordinate, embedding C^{n+1} into C^{n+2}.
    pub fn extended(&self, last: C64) -> CVec {
        let mut v = self.0.clone();
        v.push(last);
        CVec(v)
    }
}

impl Index<usize> for CVec {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl Add for &CVec {
    type Output = CVec;

    fn add(self, rhs: &CVec) -> CVec {
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVec {
    type Output = CVec;

    fn sub(self, rhs: &CVec) -> CVec {
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &CVec {
    type Output = CVec;

    fn mul(self, rhs: f64) -> CVec {
        self.scale_real(rhs)
    }
}

fn check_same_len(a: &CVec, b: &CVec) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// A point of CP^n: a unit representative whose first entry of modulus
/// above 1e-12 is real and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjPoint {
    rep: CVec,
}

impl ProjPoint {
    /// Normalizes any nonzero vector and fixes its phase.
    pub fn new(v: CVec) -> Result<Self> {
        let unit = v.normalized()?;
        let lead = unit
            .iter()
            .find(|z| z.norm() > PHASE_EPS)
            .copied()
            .ok_or_else(|| Error::InvalidInput("zero vector".into()))?;
        let phase = lead.conj() / lead.norm();
        Ok(Self {
            rep: unit.scale(phase),
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(CVec::from_pairs(pairs)?)
    }

    pub fn rep(&self) -> &CVec {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.projective_dim()
    }

    /// Equality as points of CP^n, up to `tol` in the Fubini–Study distance.
    pub fn approx_eq(&self, other: &ProjPoint, tol: f64) -> bool {
        fs_distance(self, other).map(|d| d <= tol).unwrap_or(false)
    }
}

/// Fubini–Study distance `arccos |⟨p, q⟩|`, in [0, π/2].
///
/// Evaluated as `atan2(|q − ⟨p,q⟩ p|, |⟨p,q⟩|)` to stay accurate for nearby points.
pub fn fs_distance(p: &ProjPoint, q: &ProjPoint) -> Result<f64> {
    check_same_len(&p.rep, &q.rep)?;
    let overlap = p.rep.hdot(&q.rep);
    let mut orth = q.rep.clone();
    orth.axpy(-overlap, &p.rep);
    Ok(orth.norm().atan2(overlap.norm()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentKind {
    /// Any vector of C^{n+1} attached to a sphere point.
    Ambient,
    /// `Re⟨vec, base⟩ = 0`.
    Spherical,
    /// `⟨vec, base⟩ = 0` (Hermitian).
    Horizontal,
}

/// A tangent vector `vec` attached to a base point on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentRep {
    pub base: CVec,
    pub vec: CVec,
    pub kind: TangentKind,
}

impl TangentRep {
    pub fn ambient(base: CVec, vec: CVec) -> Result<Self> {
        check_same_len(&base, &vec)?;
        Ok(Self {
            base,
            vec,
            kind: TangentKind::Ambient,
        })
    }

    pub fn spherical(base: CVec, vec: CVec) -> Result<Self> {
        check_same_len(&base, &vec)?;
        let radial = base.real_dot(&vec);
        if radial.abs() > 1e-10 * vec.norm().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "vector is not tangent to the sphere (radial part {radial:e})"
            )));
        }
        Ok(Self {
            base,
            vec,
            kind: TangentKind::Spherical,
        })
    }

    pub fn horizontal(base: CVec, vec: CVec) -> Result<Self> {
        check_same_len(&base, &vec)?;
        let overlap = base.hdot(&vec).norm();
        if overlap > 1e-10 * vec.norm().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "vector is not horizontal (|⟨v, x⟩| = {overlap:e})"
            )));
        }
        Ok(Self {
            base,
            vec,
            kind: TangentKind::Horizontal,
        })
    }

    pub fn alpha(&self) -> Result<f64> {
        alpha(&self.base, self)
    }
}

/// The contact form: `α_x(v) = Re⟨i·x, v⟩`, the Euclidean inner product of the
/// circle-action generator `u = i·x` with `v`.
pub fn alpha(x: &CVec, v: &TangentRep) -> Result<f64> {
    check_same_len(x, &v.vec)?;
    x.check_unit()?;
    Ok(alpha_raw(x, &v.vec))
}

#[inline]
pub(crate) fn alpha_raw(x: &CVec, v: &CVec) -> f64 {
    x.hdot(v).im
}

/// The Kähler form of C^{n+1}: `ω(v, w) = Im⟨v, w⟩`.
pub fn omega(v: &TangentRep, w: &TangentRep) -> Result<f64> {
    check_same_len(&v.vec, &w.vec)?;
    if v.base.max_abs_diff(&w.base) > 1e-12 {
        return Err(Error::BaseMismatch);
    }
    Ok(omega_raw(&v.vec, &w.vec))
}

#[inline]
pub(crate) fn omega_raw(v: &CVec, w: &CVec) -> f64 {
    v.hdot(w).im
}

/// Removes from `v` its components along `x` and `i·x`.
pub fn horizontal_project(x: &CVec, v: &CVec) -> TangentRep {
    TangentRep {
        base: x.clone(),
        vec: horizontal_part(x, v),
        kind: TangentKind::Horizontal,
    }
}

#[inline]
pub(crate) fn horizontal_part(x: &CVec, v: &CVec) -> CVec {
    let mut h = v.clone();
    h.axpy(-x.hdot(v), x);
    h
}

/// Gram–Schmidt on real vectors (`Re⟨·,·⟩`). Returns `None` on rank loss.
pub(crate) fn real_orthonormalize(vectors: &[CVec], tol: f64) -> Option<Vec<CVec>> {
    let mut out: Vec<CVec> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = e.real_dot(&w);
                w.axpy(C64::new(-c, 0.0), e);
            }
        }
        let n = w.norm();
        if n <= tol * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        out.push(w.scale_real(1.0 / n));
    }
    Some(out)
}

/// Result of an isotropy test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropyReport {
    /// Max `|ω(e_i, e_j)|` over sampled points, for a real orthonormal frame
    /// `e` of the horizontal lift of the tangent plane.
    pub defect: f64,
    /// Set for bodies of dimension < 2, which are isotropic for dimensional reasons.
    pub trivially_isotropic: bool,
    pub points_checked: usize,
}

/// Maximal Kähler-form pairing on orthonormalized horizontal frames.
pub fn frame_isotropy(x: &CVec, tangents: &[CVec]) -> Option<f64> {
    let horiz: Vec<CVec> = tangents.iter().map(|t| horizontal_part(x, t)).collect();
    let frame = real_orthonormalize(&horiz, 1e-10)?;
    let mut worst: f64 = 0.0;
    for i in 0..frame.len() {
        for j in i + 1..frame.len() {
            worst = worst.max(omega_raw(&frame[i], &frame[j]).abs());
        }
    }
    Some(worst)
}

/// Samples `sample_count` parameter points of `body` and reports the largest
/// Kähler-form pairing of its (horizontally lifted, orthonormalized) tangents.
pub fn isotropy_defect(
    body: &crate::submanifolds::ChartedSubmanifold,
    sample_count: usize,
) -> Result<IsotropyReport> {
    if body.dim() < 2 {
        return Ok(IsotropyReport {
            defect: 0.0,
            trivially_isotropic: true,
            points_checked: 0,
        });
    }
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for sample in body.probe_samples(sample_count, 0x0015_07a0)? {
        if let Some(d) = frame_isotropy(&sample.point, &sample.tangents) {
            worst = worst.max(d);
            checked += 1;
        }
    }
    Ok(IsotropyReport {
        defect: worst,
        trivially_isotropic: false,
        points_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pp(v: &[(f64, f64)]) -> ProjPoint {
        ProjPoint::from_pairs(v).unwrap()
    }

    #[test]
    fn cvec_rejects_short_and_nonfinite() {
        assert!(CVec::new(vec![c(1.0, 0.0)]).is_err());
        assert!(CVec::new(vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn phase_convention_holds() {
        let p = pp(&[(0.0, 0.0), (0.0, 2.0), (1.0, 1.0)]);
        assert!(p.rep()[0].norm() < 1e-15);
        assert!(p.rep()[1].im.abs() < 1e-15 && p.rep()[1].re > 0.0);
        assert!((p.rep().norm() - 1.0).abs() < 1e-12);
        let q = ProjPoint::new(p.rep().scale(C64::from_polar(1.0, 0.7))).unwrap();
        assert!(p.rep().max_abs_diff(q.rep()) < 1e-15);
    }

    #[test]
    fn fs_distance_examples() {
        let e0 = pp(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let e1 = pp(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(fs_distance(&e0, &e0).unwrap(), 0.0);
        assert!((fs_distance(&e0, &e1).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let a = pp(&[(1.0, 0.0), (0.0, 0.0)]);
        let b = pp(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)]);
        assert!((fs_distance(&a, &b).unwrap() - FRAC_PI_4).abs() < 1e-15);
        let short = pp(&[(1.0, 0.0), (0.0, 0.0)]);
        assert!(matches!(
            fs_distance(&short, &e0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alpha_examples() {
        let x = CVec::from_pairs(&[(1.0, 0.0), (0.0, 0.0)]).unwrap();
        let u = TangentRep::spherical(x.clone(), x.mul_i()).unwrap();
        assert!((alpha(&x, &u).unwrap() - 1.0).abs() < 1e-15);
        let h = TangentRep::horizontal(x.clone(), CVec::from_pairs(&[(0.0, 0.0), (0.3, -0.2)]).unwrap()).unwrap();
        assert_eq!(alpha(&x, &h).unwrap(), 0.0);
        let v = TangentRep::spherical(x.clone(), CVec::from_pairs(&[(0.0, 0.6), (0.8, 0.0)]).unwrap()).unwrap();
        assert!((alpha(&x, &v).unwrap() - 0.6).abs() < 1e-15);
        let not_unit = CVec::from_pairs(&[(2.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(matches!(alpha(&not_unit, &v), Err(Error::NotUnit(_))));
    }

    #[test]
    fn omega_examples() {
        let x = CVec::from_pairs(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).unwrap();
        let v = TangentRep::horizontal(x.clone(), CVec::from_pairs(&[(0.0, 0.0), (0.6, 0.0), (0.0, 0.8)]).unwrap()).unwrap();
        assert_eq!(omega(&v, &v).unwrap(), 0.0);
        let iv = TangentRep::horizontal(x.clone(), v.vec.mul_i()).unwrap();
        assert!((omega(&v, &iv).unwrap() - 1.0).abs() < 1e-15);
        let base = CVec::from_pairs(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]).unwrap();
        let a = TangentRep::ambient(base.clone(), CVec::from_pairs(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).unwrap()).unwrap();
        let b = TangentRep::ambient(base, CVec::from_pairs(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(omega(&a, &b).unwrap(), 0.0);
        assert!(matches!(omega(&v, &a), Err(Error::BaseMismatch)));
    }

    #[test]
    fn horizontal_project_examples() {
        let x = CVec::from_pairs(&[(0.6, 0.0), (0.0, 0.8)]).unwrap();
        assert!(horizontal_project(&x, &x).vec.norm() < 1e-15);
        assert!(horizontal_project(&x, &x.mul_i()).vec.norm() < 1e-15);
        let h = CVec::from_pairs(&[(0.8, 0.0), (0.0, -0.6)]).unwrap();
        assert!(x.hdot(&h).norm() < 1e-15);
        assert!(horizontal_project(&x, &h).vec.max_abs_diff(&h) < 1e-14);
    }

    fn arb_cvec(len: usize) -> impl Strategy<Value = CVec> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
            .prop_filter("nonzero", |v| v.iter().any(|p| p.0.abs() + p.1.abs() > 1e-3))
            .prop_map(|v| CVec::from_pairs(&v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fs_triangle_inequality(a in arb_cvec(3), b in arb_cvec(3), c in arb_cvec(3)) {
            let (p, q, r) = (ProjPoint::new(a).unwrap(), ProjPoint::new(b).unwrap(), ProjPoint::new(c).unwrap());
            let slack = fs_distance(&p, &q).unwrap() + fs_distance(&q, &r).unwrap() - fs_distance(&p, &r).unwrap();
            prop_assert!(slack >= -1e-12);
        }

        #[test]
        fn alpha_vanishes_on_horizontal_image(a in arb_cvec(4), v in arb_cvec(4)) {
            let x = a.normalized().unwrap();
            let h = horizontal_project(&x, &v);
            prop_assert!(alpha(&x, &h).unwrap().abs() < 1e-12);
        }

        #[test]
        fn horizontal_project_idempotent_and_contracting(a in arb_cvec(3), v in arb_cvec(3)) {
            let x = a.normalized().unwrap();
            let once = horizontal_project(&x, &v).vec;
            let twice = horizontal_project(&x, &once).vec;
            prop_assert!(once.max_abs_diff(&twice) < 1e-14);
            prop_assert!(once.norm() <= v.norm() + 1e-14);
        }

        /// dα(v, w) = v(α(w)) − w(α(v)) for constant extensions; checked by
        /// finite differences of the 1-form x ↦ α_x on a horizontal 2-plane.
        #[test]
        fn exterior_derivative_of_alpha_is_twice_omega(a in arb_cvec(3), p in arb_cvec(3), q in arb_cvec(3)) {
            let x = a.normalized().unwrap();
            let v = horizontal_project(&x, &p).vec;
            let w = horizontal_project(&x, &q).vec;
            prop_assume!(v.norm() > 1e-2 && w.norm() > 1e-2);
            let h = 1e-5;
            let alpha_at = |y: &CVec, t: &CVec| y.hdot(t).im;
            let shift = |d: &CVec, s: f64| { let mut y = x.clone(); y.axpy(C64::new(s, 0.0), d); y };
            let dv_alpha_w = (alpha_at(&shift(&v, h), &w) - alpha_at(&shift(&v, -h), &w)) / (2.0 * h);
            let dw_alpha_v = (alpha_at(&shift(&w, h), &v) - alpha_at(&shift(&w, -h), &v)) / (2.0 * h);
            let d_alpha = dv_alpha_w - dw_alpha_v;
            prop_assert!((d_alpha - 2.0 * omega_raw(&v, &w)).abs() < 1e-6);
        }
    }
}
