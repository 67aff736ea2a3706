//! Real homogeneous polynomials, binary forms and Sturm-sequence root counting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Remainders whose coefficients fall below this (relative to the divisor
/// chain scale) are treated as zero in the Sturm chain.
const STURM_ZERO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "e")]
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// A real homogeneous polynomial in n+1 variables, stored as sparse monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousPoly {
    terms: Vec<Monomial>,
    degree: u32,
    nvars: usize,
}

impl HomogeneousPoly {
    pub fn new(terms: Vec<Monomial>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("polynomial has no terms".into()))?;
        let nvars = first.exponents.len();
        let degree = first.degree();
        if degree == 0 {
            return Err(Error::InvalidInput("polynomials must have positive degree".into()));
        }
        for t in &terms {
            if t.exponents.len() != nvars {
                return Err(Error::InvalidInput("exponent vectors differ in length".into()));
            }
            if t.degree() != degree {
                return Err(Error::InvalidInput(format!(
                    "polynomial is not homogeneous: degrees {degree} and {}",
                    t.degree()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        Ok(Self {
            terms,
            degree,
            nvars,
        })
    }

    /// `Σ c_i x^{e_i}` from `(coefficient, exponents)` pairs.
    pub fn from_terms(terms: &[(f64, &[u32])]) -> Result<Self> {
        Self::new(
            terms
                .iter()
                .map(|(c, e)| Monomial {
                    coeff: *c,
                    exponents: e.to_vec(),
                })
                .collect(),
        )
    }

    /// The Fermat form `x_0^d + … + x_n^d`.
    pub fn fermat(nvars: usize, degree: u32) -> Self {
        let terms = (0..nvars)
            .map(|i| {
                let mut e = vec![0; nvars];
                e[i] = degree;
                Monomial {
                    coeff: 1.0,
                    exponents: e,
                }
            })
            .collect();
        Self::new(terms).expect("Fermat form is homogeneous")
    }

    /// The coordinate function `x_k`.
    pub fn coordinate(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        Self::new(vec![Monomial {
            coeff: 1.0,
            exponents: e,
        }])
        .expect("linear form is homogeneous")
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn coeff_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max)
    }

    /// Coefficient of the pure power `x_k^d`.
    pub fn pure_power_coeff(&self, k: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.exponents[k] == self.degree)
            .map(|t| t.coeff)
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(x)
                    .fold(t.coeff, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for t in &self.terms {
            for k in 0..self.nvars {
                let ek = t.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut v = t.coeff * ek as f64;
                for (j, (&e, &xj)) in t.exponents.iter().zip(x).enumerate() {
                    let p = if j == k { e - 1 } else { e };
                    v *= xj.powi(p as i32);
                }
                g[k] += v;
            }
        }
        g
    }

    /// Substitutes `x = s·b1 + t·b2` and expands into a binary form.
    pub fn restrict_to_line(&self, b1: &[f64], b2: &[f64]) -> BinaryForm {
        let d = self.degree as usize;
        let mut coeffs = vec![0.0; d + 1];
        for t in &self.terms {
            // product of (b1_j s + b2_j t)^{e_j}, indexed by the power of s
            let mut prod = vec![0.0; d + 1];
            prod[0] = t.coeff;
            let mut deg = 0usize;
            for (j, &e) in t.exponents.iter().enumerate() {
                for _ in 0..e {
                    for p in (0..=deg).rev() {
                        let c = prod[p];
                        prod[p + 1] += c * b1[j];
                        prod[p] = c * b2[j];
                    }
                    deg += 1;
                }
            }
            for (acc, p) in coeffs.iter_mut().zip(&prod) {
                *acc += p;
            }
        }
        BinaryForm { coeffs }
    }
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    coeffs: Vec<Monomial>,
}

#[derive(Serialize, Deserialize)]
struct LocusJson {
    n: usize,
    polys: Vec<PolyJson>,
}

/// Common real zero set in RP^n of real homogeneous polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitRealLocus {
    n: usize,
    polys: Vec<HomogeneousPoly>,
}

impl ImplicitRealLocus {
    pub fn new(n: usize, polys: Vec<HomogeneousPoly>) -> Result<Self> {
        if polys.is_empty() {
            return Err(Error::InvalidInput("real locus needs at least one polynomial".into()));
        }
        if polys.len() > n {
            return Err(Error::InvalidInput(format!(
                "{} polynomials in RP^{n} leave nothing to integrate",
                polys.len()
            )));
        }
        for p in &polys {
            if p.nvars() != n + 1 {
                return Err(Error::DimensionMismatch {
                    expected: n + 1,
                    got: p.nvars(),
                });
            }
        }
        Ok(Self { n, polys })
    }

    pub fn hypersurface(poly: HomogeneousPoly) -> Result<Self> {
        let n = poly
            .nvars()
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidInput("no variables".into()))?;
        Self::new(n, vec![poly])
    }

    /// Parses `{"n": int, "polys": [{"coeffs": [{"c": float, "e": [int, …]}]}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LocusJson = serde_json::from_str(text)?;
        let polys = raw
            .polys
            .into_iter()
            .map(|p| HomogeneousPoly::new(p.coeffs))
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.n, polys)
    }

    pub fn to_json(&self) -> String {
        let raw = LocusJson {
            n: self.n,
            polys: self
                .polys
                .iter()
                .map(|p| PolyJson {
                    coeffs: p.terms.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("locus serializes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn polys(&self) -> &[HomogeneousPoly] {
        &self.polys
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|p| p.degree()).collect()
    }

    /// Real dimension of the locus: n − (number of equations).
    pub fn dim(&self) -> usize {
        self.n - self.polys.len()
    }

    /// `m` with `2m = n − k`, when the locus has the even dimension Crofton counting needs.
    pub fn half_dim(&self) -> Option<usize> {
        let d = self.dim();
        (d % 2 == 0 && d >= 2).then_some(d / 2)
    }
}

/// A binary form `Σ coeffs[k] s^k t^{d−k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryForm {
    pub coeffs: Vec<f64>,
}

impl BinaryForm {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let d = self.degree() as i32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * s.powi(k as i32) * t.powi(d - k as i32))
            .sum()
    }

    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// `F(a s + b t, c s + e t)`.
    pub fn substitute(&self, a: f64, b: f64, c: f64, e: f64) -> BinaryForm {
        let d = self.degree();
        let mut out = vec![0.0; d + 1];
        for (k, &coef) in self.coeffs.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            // (a s + b t)^k (c s + e t)^{d-k}, indexed by power of s
            let mut prod = vec![0.0; d + 1];
            prod[0] = coef;
            let mut deg = 0;
            for (lin_s, lin_t, reps) in [(a, b, k), (c, e, d - k)] {
                for _ in 0..reps {
                    for p in (0..=deg).rev() {
                        let v = prod[p];
                        prod[p + 1] += v * lin_s;
                        prod[p] = v * lin_t;
                    }
                    deg += 1;
                }
            }
            for (o, p) in out.iter_mut().zip(&prod) {
                *o += p;
            }
        }
        BinaryForm { coeffs: out }
    }

    /// Dehomogenization at `t = 1`.
    pub fn dehomogenize(&self) -> UniPoly {
        UniPoly::new(self.coeffs.clone())
    }
}

/// Univariate real polynomial, `coeffs[k]` multiplying `x^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<f64>,
}

impl UniPoly {
    /// Trailing zero coefficients are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> UniPoly {
        if self.coeffs.len() == 1 {
            return UniPoly::new(vec![0.0]);
        }
        UniPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    fn normalized(&self) -> UniPoly {
        let s = self.max_abs();
        if s == 0.0 {
            return self.clone();
        }
        UniPoly::new(self.coeffs.iter().map(|c| c / s).collect())
    }

    /// Remainder of `self` divided by `divisor`.
    fn rem(&self, divisor: &UniPoly) -> UniPoly {
        let mut r = self.coeffs.clone();
        let dd = divisor.degree();
        let lead = divisor.leading();
        while r.len() > dd && r.len() > 1 {
            let shift = r.len() - 1 - dd;
            let factor = r[r.len() - 1] / lead;
            for (k, &c) in divisor.coeffs.iter().enumerate() {
                r[shift + k] -= factor * c;
            }
            r.pop();
        }
        UniPoly::new(r)
    }

    /// The Sturm chain `p, p', −rem(p, p'), …`, each member rescaled to unit
    /// max-coefficient (positive scaling leaves sign patterns unchanged).
    pub fn sturm_chain(&self) -> Vec<UniPoly> {
        let mut chain = vec![self.normalized()];
        let d = self.derivative();
        if d.is_zero() {
            return chain;
        }
        chain.push(d.normalized());
        loop {
            let n = chain.len();
            let r = chain[n - 2].rem(&chain[n - 1]);
            // the chain members are normalized, so an absolute cut is relative
            let mut r = UniPoly::new(
                r.coeffs
                    .iter()
                    .map(|&c| if c.abs() < STURM_ZERO { 0.0 } else { c })
                    .collect(),
            );
            if r.is_zero() {
                break;
            }
            r = UniPoly::new(r.coeffs.iter().map(|c| -c).collect()).normalized();
            let last = r.degree() == 0;
            chain.push(r);
            if last {
                break;
            }
        }
        chain
    }

    /// Number of distinct real roots in the half-open interval `(a, b]`.
    pub fn count_roots_in(&self, chain: &[UniPoly], a: f64, b: f64) -> usize {
        let va = sign_changes(chain.iter().map(|p| p.eval(a)));
        let vb = sign_changes(chain.iter().map(|p| p.eval(b)));
        va.saturating_sub(vb)
    }

    /// Number of distinct real roots, from the signs of the chain at ±∞.
    pub fn count_real_roots(&self) -> usize {
        let chain = self.sturm_chain();
        let at = |sign: f64| {
            sign_changes(chain.iter().map(|p| {
                let parity = if p.degree() % 2 == 0 { 1.0 } else { sign };
                p.leading() * parity
            }))
        };
        at(-1.0).saturating_sub(at(1.0))
    }

    /// Cauchy bound: every root has modulus below it.
    pub fn root_bound(&self) -> f64 {
        let lead = self.leading().abs();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| c.abs() / lead)
            .fold(0.0, f64::max)
    }

    /// Distinct real roots in ascending order: Sturm bisection isolates each
    /// root, then bisection refines it to double precision.
    pub fn real_roots(&self) -> Vec<f64> {
        if self.degree() == 0 {
            return Vec::new();
        }
        if self.degree() == 1 {
            return vec![-self.coeffs[0] / self.coeffs[1]];
        }
        let chain = self.sturm_chain();
        let bound = self.root_bound();
        let mut out = Vec::new();
        self.isolate(&chain, -bound, bound, 0, &mut out);
        out
    }

    fn isolate(&self, chain: &[UniPoly], a: f64, b: f64, depth: u32, out: &mut Vec<f64>) {
        let count = self.count_roots_in(chain, a, b);
        if count == 0 {
            return;
        }
        if count == 1 || depth > 60 || b - a < 1e-14 * (1.0 + a.abs()) {
            let root = if count == 1 {
                self.refine(chain, a, b)
            } else {
                0.5 * (a + b)
            };
            out.push(root);
            return;
        }
        let mid = 0.5 * (a + b);
        self.isolate(chain, a, mid, depth + 1, out);
        self.isolate(chain, mid, b, depth + 1, out);
    }

    /// Bisection on `(a, b]` known to hold exactly one distinct root; the root
    /// may have even multiplicity, so sign tests alone are not enough.
    fn refine(&self, chain: &[UniPoly], mut a: f64, mut b: f64) -> f64 {
        let fb = self.eval(b);
        if fb == 0.0 {
            return b;
        }
        let fa = self.eval(a);
        let sign_change = fa * fb < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            let left = if sign_change {
                self.eval(a) * fm < 0.0
            } else {
                self.count_roots_in(chain, a, mid) == 1
            };
            if left {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Discriminant up to sign, `Res(p, p') / lead`, from the Sylvester determinant.
    pub fn discriminant_magnitude(&self) -> f64 {
        let d = self.degree();
        if d < 2 {
            return 1.0;
        }
        let dp = self.derivative();
        let size = 2 * d - 1;
        let mut m = nalgebra::DMatrix::<f64>::zeros(size, size);
        // rows of p: d-1 shifted copies; rows of p': d shifted copies
        for r in 0..d - 1 {
            for (k, &c) in self.coeffs.iter().rev().enumerate() {
                m[(r, r + k)] = c;
            }
        }
        for r in 0..d {
            for (k, &c) in dp.coeffs.iter().rev().enumerate() {
                m[(d - 1 + r, r + k)] = c;
            }
        }
        (m.determinant() / self.leading()).abs()
    }
}

fn sign_changes<I: Iterator<Item = f64>>(values: I) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            changes += 1;
        }
        last = v;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneity_is_validated() {
        let bad = HomogeneousPoly::from_terms(&[(1.0, &[2, 0]), (1.0, &[0, 1])]);
        assert!(bad.is_err());
        let json = r#"{"n": 1, "polys": [{"coeffs": [{"c": 1.0, "e": [2, 0]}, {"c": 1.0, "e": [1, 0]}]}]}"#;
        assert!(ImplicitRealLocus::from_json(json).is_err());
        let short = r#"{"n": 2, "polys": [{"coeffs": [{"c": 1.0, "e": [1, 0]}]}]}"#;
        assert!(ImplicitRealLocus::from_json(short).is_err());
    }

    #[test]
    fn json_round_trip() {
        let locus = ImplicitRealLocus::hypersurface(HomogeneousPoly::fermat(4, 3)).unwrap();
        let back = ImplicitRealLocus::from_json(&locus.to_json()).unwrap();
        assert_eq!(locus, back);
        assert_eq!(back.degrees(), vec![3]);
        assert_eq!(back.half_dim(), Some(1));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = HomogeneousPoly::from_terms(&[(1.0, &[3, 0, 0]), (-2.0, &[1, 1, 1]), (0.5, &[0, 2, 1])]).unwrap();
        let x = [0.3, -0.7, 1.1];
        let g = p.gradient(&x);
        for k in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn restriction_examples() {
        let x0 = HomogeneousPoly::coordinate(3, 0);
        assert_eq!(x0.restrict_to_line(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).coeffs, vec![0.0, 1.0]);
        let cubic = HomogeneousPoly::from_terms(&[(1.0, &[3, 0]), (1.0, &[0, 3])]).unwrap();
        assert_eq!(cubic.restrict_to_line(&[1.0, 0.0], &[0.0, 1.0]).coeffs, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn sturm_counts() {
        // (x-1)(x+2)(x-3)
        let p = UniPoly::new(vec![6.0, -5.0, -2.0, 1.0]);
        assert_eq!(p.count_real_roots(), 3);
        // x^2 + 1
        assert_eq!(UniPoly::new(vec![1.0, 0.0, 1.0]).count_real_roots(), 0);
        // (x-1)^2 (x+1): two distinct roots
        assert_eq!(UniPoly::new(vec![1.0, -1.0, -1.0, 1.0]).count_real_roots(), 2);
    }

    #[test]
    fn real_roots_are_accurate() {
        let p = UniPoly::new(vec![6.0, -5.0, -2.0, 1.0]);
        let roots = p.real_roots();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((r - e).abs() < 1e-12, "{r} vs {e}");
        }
        // double root at 1
        let q = UniPoly::new(vec![1.0, -1.0, -1.0, 1.0]);
        let roots = q.real_roots();
        assert_eq!(roots.len(), 2);
        assert!((roots[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn discriminant_of_quadratic() {
        // x^2 - 3x + 2: disc = 9 - 8 = 1
        let p = UniPoly::new(vec![2.0, -3.0, 1.0]);
        assert!((p.discriminant_magnitude() - 1.0).abs() < 1e-12);
        // cubic with roots 0, 1, -1: disc = 4
        let c = UniPoly::new(vec![0.0, -1.0, 0.0, 1.0]);
        assert!((c.discriminant_magnitude() - 4.0).abs() < 1e-12);
        assert!(UniPoly::new(vec![1.0, -2.0, 1.0]).discriminant_magnitude() < 1e-15);
    }

    #[test]
    fn substitution_matches_evaluation() {
        let f = BinaryForm::new(vec![0.3, -1.2, 0.7, 2.0]);
        let (a, b, c, e) = (0.6, -0.8, 0.8, 0.6);
        let g = f.substitute(a, b, c, e);
        for (s, t) in [(1.0, 0.0), (0.3, 0.9), (-1.1, 0.2)] {
            assert!((g.eval(s, t) - f.eval(a * s + b * t, c * s + e * t)).abs() < 1e-12);
        }
    }
}
