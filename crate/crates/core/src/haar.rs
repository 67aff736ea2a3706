//! Seeded Haar sampling on U(n+1), SU(n+1) and the stabilizer of `[e_0]`.
//!
//! Every sample is drawn from its own ChaCha stream keyed by
//! `(seed, domain, index)`, so results never depend on call order or on how
//! samples are spread over threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::projective::{CVec, C64};

/// Stream domains, so that different samplers never share random bits.
pub mod domain {
    pub const UNITARY: u64 = 0x5541_5252;
    pub const STABILIZER: u64 = 0x5354_4142;
    pub const ISOTROPIC_FRAME: u64 = 0x4953_4f46;
    pub const PROBE: u64 = 0x5052_4f42;
    pub const SELF_CHECK: u64 = 0x5345_4c46;
}

/// Counter-based RNG: the key is `(seed, domain)`, the stream id is `index`.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A unitary matrix together with the key that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    mat: DMatrix<C64>,
    pub seed: u64,
    pub index: u64,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
            seed: 0,
            index: 0,
        }
    }

    /// Wraps a matrix, rejecting it unless it is unitary to 1e-10.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() < 2 {
            return Err(Error::InvalidInput("group elements are square, size ≥ 2".into()));
        }
        let g = Self {
            mat,
            seed: 0,
            index: 0,
        };
        let defect = g.unitarity_defect();
        if defect > 1e-10 {
            return Err(Error::InvalidInput(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(g)
    }

    /// Real orthogonal matrices are unitary; handy for the stabilizer of RP^n.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mat = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::from_matrix(mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        let n = self.dim();
        assert_eq!(v.len(), n, "dimension mismatch in group action");
        let out = (0..n)
            .map(|i| {
                (0..n).fold(C64::new(0.0, 0.0), |acc, j| acc + self.mat[(i, j)] * v[j])
            })
            .collect();
        CVec::from_vec_unchecked(out)
    }

    /// `g·e_k`.
    pub fn column(&self, k: usize) -> CVec {
        CVec::from_vec_unchecked(self.mat.column(k).iter().copied().collect())
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            mat: &self.mat * &other.mat,
            seed: self.seed,
            index: self.index,
        }
    }

    pub fn adjoint(&self) -> GroupElement {
        GroupElement {
            mat: self.mat.adjoint(),
            seed: self.seed,
            index: self.index,
        }
    }

    /// `max |(g g*)_{ij} − δ_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = &self.mat * self.mat.adjoint();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn determinant(&self) -> C64 {
        self.mat.clone().determinant()
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }
}

/// Modified Gram–Schmidt QR on the columns of `a`, with the positive-real
/// diagonal for R that makes Q Haar distributed when `a` is Ginibre.
fn orthonormalize_columns(a: &mut DMatrix<C64>) {
    let n = a.ncols();
    for j in 0..n {
        // two passes keep the columns orthogonal to machine precision
        for _ in 0..2 {
            for k in 0..j {
                let proj = (0..a.nrows()).fold(C64::new(0.0, 0.0), |acc, r| {
                    acc + a[(r, k)].conj() * a[(r, j)]
                });
                for r in 0..a.nrows() {
                    let qk = a[(r, k)];
                    a[(r, j)] -= proj * qk;
                }
            }
        }
        let norm = a.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..a.nrows() {
            a[(r, j)] /= norm;
        }
    }
}

fn haar_matrix<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let mut a = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    orthonormalize_columns(&mut a);
    a
}

/// A Haar-distributed element of U(n+1), reproducible from `(seed, index)`.
pub fn sample_unitary(n_plus_1: usize, seed: u64, index: u64) -> Result<GroupElement> {
    if n_plus_1 < 2 {
        return Err(Error::InvalidInput(format!(
            "unitary sampling needs n+1 ≥ 2, got {n_plus_1}"
        )));
    }
    let mut rng = stream_rng(seed, domain::UNITARY, index);
    Ok(GroupElement {
        mat: haar_matrix(n_plus_1, &mut rng),
        seed,
        index,
    })
}

/// Divides `g` by the principal (n+1)-th root of its determinant.
pub fn project_su(g: &GroupElement) -> GroupElement {
    let det = g.determinant();
    let root = det.powf(1.0 / g.dim() as f64);
    GroupElement {
        mat: g.mat.map(|z| z / root),
        seed: g.seed,
        index: g.index,
    }
}

/// An element of the stabilizer of `[e_0]`: `diag(phase, U(n))`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerElement {
    element: GroupElement,
}

impl StabilizerElement {
    pub fn as_group_element(&self) -> &GroupElement {
        &self.element
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.element.apply(v)
    }
}

/// Haar sample of the stabilizer `U(1) × U(n)` of the base point `[e_0]` in CP^n.
pub fn sample_stabilizer(n: usize, seed: u64, index: u64) -> Result<StabilizerElement> {
    if n < 1 {
        return Err(Error::InvalidInput(format!("stabilizer needs n ≥ 1, got {n}")));
    }
    let mut rng = stream_rng(seed, domain::STABILIZER, index);
    let phase = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    let block = haar_matrix(n, &mut rng);
    let mut mat = DMatrix::zeros(n + 1, n + 1);
    mat[(0, 0)] = phase;
    mat.view_mut((1, 1), (n, n)).copy_from(&block);
    Ok(StabilizerElement {
        element: GroupElement { mat, seed, index },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::ProjPoint;

    #[test]
    fn determinism() {
        let a = sample_unitary(4, 7, 123).unwrap();
        let b = sample_unitary(4, 7, 123).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_unitary(4, 7, 124).unwrap());
        assert_ne!(a, sample_unitary(4, 8, 123).unwrap());
    }

    #[test]
    fn rejects_small_dimensions() {
        assert!(sample_unitary(1, 0, 0).is_err());
        assert!(sample_stabilizer(0, 0, 0).is_err());
    }

    #[test]
    fn samples_are_unitary() {
        for i in 0..500 {
            assert!(sample_unitary(5, 3, i).unwrap().unitarity_defect() < 1e-10);
            assert!(sample_stabilizer(3, 3, i).unwrap().as_group_element().unitarity_defect() < 1e-10);
        }
    }

    #[test]
    fn first_column_overlap_mean() {
        // g·e_0 is uniform on S^5, so E|z_0|² = 1/3.
        let vals: Vec<f64> = (0..10_000)
            .map(|i| sample_unitary(3, 11, i).unwrap().matrix()[(0, 0)].norm_sqr())
            .collect();
        let (mean, std) = crate::numeric::mean_and_std(&vals);
        let stderr = std / (vals.len() as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * stderr, "mean {mean}, stderr {stderr}");
    }

    #[test]
    fn stabilizer_fixes_base_point_and_mixes_block() {
        let e0 = CVec::basis(3, 0);
        let e1 = CVec::basis(3, 1);
        let mut vals = Vec::new();
        for i in 0..10_000 {
            let k = sample_stabilizer(2, 5, i).unwrap();
            let image = k.apply(&e0);
            assert!((image[0].norm() - 1.0).abs() < 1e-12);
            assert!(image[1].norm() + image[2].norm() < 1e-12);
            vals.push(e1.hdot(&k.apply(&e1)).norm_sqr());
        }
        let (mean, std) = crate::numeric::mean_and_std(&vals);
        let stderr = std / (vals.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * stderr, "mean {mean}");
    }

    #[test]
    fn project_su_examples() {
        let g = sample_unitary(3, 1, 1).unwrap();
        let s = project_su(&g);
        assert!((s.determinant() - C64::new(1.0, 0.0)).norm() < 1e-10);
        let again = project_su(&s);
        assert!((&again.mat - &s.mat).iter().all(|z| z.norm() < 1e-14));

        let d = GroupElement::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 1.0),
            C64::new(1.0, 0.0),
        ])))
        .unwrap();
        assert!((project_su(&d).determinant() - C64::new(1.0, 0.0)).norm() < 1e-12);

        let p = ProjPoint::from_pairs(&[(0.3, 0.1), (-0.2, 0.5), (0.7, -0.4)]).unwrap();
        let a = ProjPoint::new(g.apply(p.rep())).unwrap();
        let b = ProjPoint::new(s.apply(p.rep())).unwrap();
        assert!(a.rep().max_abs_diff(b.rep()) < 1e-12);
    }

    /// Two-sample Kolmogorov–Smirnov statistic.
    fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn left_invariance_of_trace_distribution() {
        let h = sample_unitary(3, 99, 0).unwrap();
        let n = 10_000;
        let plain: Vec<f64> = (0..n).map(|i| sample_unitary(3, 1, i).unwrap().trace().norm()).collect();
        let shifted: Vec<f64> = (0..n)
            .map(|i| h.compose(&sample_unitary(3, 2, i).unwrap()).trace().norm())
            .collect();
        let d = ks_statistic(plain, shifted);
        // 1% critical value: c(α) √((n+m)/(n m)) with c = 1.628
        let critical = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} ≥ {critical}");
    }
}
