//! Exact counts of `P ∩ gQ` for the totally geodesic RP^{2m} and for real
//! loci of hypersurfaces, where `Q` is the coordinate CP^{n−m}.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::haar::GroupElement;
use crate::polynomial::{BinaryForm, HomogeneousPoly, ImplicitRealLocus, UniPoly};
use crate::projective::{CVec, C64};
use crate::submanifolds::complex_orthonormalize;

/// Relative singular-value cut for real kernels.
pub const KERNEL_TOL: f64 = 1e-9;
/// Normalized discriminant below which a root counts as near-multiple.
pub const DISCRIMINANT_TOL: f64 = 1e-12;
/// Normalized leading coefficient below which a form is rotated before
/// dehomogenizing.
const LEADING_TOL: f64 = 1e-3;

/// A complex linear subspace `H ⊂ C^{n+1}` with an orthonormal basis; its
/// projectivization is a linear CP^{dim−1}.
#[derive(Clone, Debug)]
pub struct ComplexSubspace {
    basis: Vec<CVec>,
}

impl ComplexSubspace {
    /// Orthonormalizes a spanning list.
    pub fn from_spanning(vectors: &[CVec]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidInput("empty subspace basis".into()));
        }
        let len = vectors[0].len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: bad.len(),
            });
        }
        Ok(Self {
            basis: complex_orthonormalize(vectors)?,
        })
    }

    /// `span(e_0, …, e_k)` in C^{n+1}.
    pub fn coordinate(k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidInput(format!("coordinate subspace e_0..e_{k} in C^{}", n + 1)));
        }
        Ok(Self {
            basis: (0..=k).map(|j| CVec::basis(n + 1, j)).collect(),
        })
    }

    /// `g · H`.
    pub fn transformed(&self, g: &GroupElement) -> Result<Self> {
        if g.dim() != self.ambient_len() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_len(),
                got: g.dim(),
            });
        }
        Ok(Self {
            basis: self.basis.iter().map(|b| g.apply(b)).collect(),
        })
    }

    pub fn basis(&self) -> &[CVec] {
        &self.basis
    }

    pub fn complex_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_len(&self) -> usize {
        self.basis[0].len()
    }

    /// Largest entry of `B* B − I`.
    pub fn gram_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.hdot(b) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// `I − Σ b b*`, whose kernel is the subspace.
    fn complement_projector(&self) -> DMatrix<C64> {
        let len = self.ambient_len();
        let mut m = DMatrix::<C64>::identity(len, len);
        for b in &self.basis {
            for r in 0..len {
                for c in 0..len {
                    m[(r, c)] -= b[r] * b[c].conj();
                }
            }
        }
        m
    }

    /// The real equations `[Re(I − Π); Im(I − Π)] · F` cutting out real points
    /// `x = F c` of the subspace, for a real frame `F` given by columns.
    fn real_system(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        let comp = self.complement_projector();
        let len = self.ambient_len();
        let re = comp.map(|z| z.re) * frame;
        let im = comp.map(|z| z.im) * frame;
        let mut out = DMatrix::<f64>::zeros(2 * len, frame.ncols());
        out.rows_mut(0, len).copy_from(&re);
        out.rows_mut(len, len).copy_from(&im);
        out
    }
}

/// Basis of the real points of a complex subspace.
#[derive(Clone, Debug)]
pub struct RealTrace {
    /// Orthonormal vectors of R^{n+1}.
    pub basis: Vec<Vec<f64>>,
    /// Dimension for a subspace in general position, `max(0, 2 dim_C H − (n+1))`.
    pub generic_dim: usize,
    /// Smallest singular value kept out of the kernel, relative to the largest.
    pub condition: f64,
}

impl RealTrace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_generic(&self) -> bool {
        self.dim() == self.generic_dim
    }
}

/// Kernel of a real matrix by SVD, with the relative singular-value cut.
/// Returns the kernel basis (in the coordinates of the columns) and the
/// smallest relative singular value outside it.
fn real_kernel(a: &DMatrix<f64>) -> (Vec<Vec<f64>>, f64) {
    let cols = a.ncols();
    // pad short matrices so the SVD returns a full set of right singular vectors
    let a = if a.nrows() < cols {
        let mut p = DMatrix::<f64>::zeros(cols, cols);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut kernel = Vec::new();
    let mut condition = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let rel = if largest > 0.0 { s / largest } else { 0.0 };
        if rel < KERNEL_TOL {
            kernel.push(v_t.row(i).iter().copied().collect());
        } else {
            condition = condition.min(rel);
        }
    }
    (kernel, condition)
}

/// The real points `{x ∈ R^{n+1} : x ∈ H}` of a complex subspace.
pub fn real_trace_of(h: &ComplexSubspace) -> RealTrace {
    let len = h.ambient_len();
    let (basis, condition) = real_kernel(&h.real_system(&DMatrix::identity(len, len)));
    RealTrace {
        basis,
        generic_dim: (2 * h.complex_dim()).saturating_sub(len),
        condition,
    }
}

/// An exact intersection count with its transversality verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountResult {
    pub count: usize,
    pub transversal: bool,
    /// Smallest relative singular value (linear cases) or normalized
    /// discriminant (root counts) actually observed.
    pub condition: f64,
}

/// `#(P ∩ H)` for the real projective subspace `P` spanned by the
/// orthonormal real `frame` and a complex subspace `H` with `dim_R P = 2 codim_C H`
/// in projective terms. The real solutions form a kernel of dimension 1 in
/// general position, i.e. exactly one point.
pub fn count_real_subspace_cap(frame: &[Vec<f64>], h: &ComplexSubspace) -> Result<CountResult> {
    let len = h.ambient_len();
    if let Some(bad) = frame.iter().find(|f| f.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: bad.len(),
        });
    }
    let f = DMatrix::from_fn(len, frame.len(), |r, c| frame[c][r]);
    let (kernel, condition) = real_kernel(&h.real_system(&f));
    Ok(CountResult {
        count: kernel.len().min(1),
        transversal: kernel.len() == 1,
        condition,
    })
}

/// Checks `1 ≤ m`, `2m ≤ n` and returns the coordinate frame of RP^{2m}.
fn rp_frame(m: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    if m < 1 || 2 * m > n {
        return Err(Error::InvalidInput(format!("RP^(2m) in CP^n needs 1 ≤ m, 2m ≤ n; got m={m}, n={n}")));
    }
    Ok((0..=2 * m)
        .map(|j| {
            let mut e = vec![0.0; n + 1];
            e[j] = 1.0;
            e
        })
        .collect())
}

/// `#(RP^{2m} ∩ g CP^{n−m})` with both bodies in standard position.
pub fn count_rp_cap_line(m: usize, n: usize, g: &GroupElement) -> Result<CountResult> {
    let frame = rp_frame(m, n)?;
    let h = ComplexSubspace::coordinate(n - m, n)?.transformed(g)?;
    count_real_subspace_cap(&frame, &h)
}

/// The form `f(s b_1 + t b_2)`.
pub fn restrict_to_projective_line(f: &HomogeneousPoly, b1: &[f64], b2: &[f64]) -> Result<BinaryForm> {
    let n = f.nvars();
    if b1.len() != n || b2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if b1.len() != n { b1.len() } else { b2.len() },
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (aa, bb, ab) = (dot(b1, b1), dot(b2, b2), dot(b1, b2));
    if !(aa * bb - ab * ab > 1e-18 * aa * bb) {
        return Err(Error::InvalidInput("line basis vectors are linearly dependent".into()));
    }
    Ok(f.restrict_to_line(b1, b2))
}

/// Number of distinct real roots of a binary form on RP^1, including the
/// root at infinity `t = 0`.
pub fn count_real_projective_roots(form: &BinaryForm) -> Result<CountResult> {
    let scale = form.scale();
    if !(scale > 0.0) {
        return Err(Error::ZeroForm);
    }
    let coeffs: Vec<f64> = form.coeffs.iter().map(|c| c / scale).collect();
    Ok(count_normalized(&coeffs))
}

fn count_normalized(coeffs: &[f64]) -> CountResult {
    let d = coeffs.len() - 1;
    if d == 0 {
        return CountResult {
            count: 0,
            transversal: true,
            condition: 1.0,
        };
    }
    if coeffs[d] == 0.0 {
        // F = t G: one root at infinity, and a second one would be multiple
        let rest = count_normalized(&coeffs[..d]);
        let double = coeffs[d - 1] == 0.0;
        return CountResult {
            count: rest.count + usize::from(!double),
            transversal: rest.transversal && !double,
            condition: if double { 0.0 } else { rest.condition },
        };
    }
    let form = BinaryForm::new(coeffs.to_vec());
    let form = if coeffs[d].abs() < LEADING_TOL {
        // move a non-root to infinity; rotations preserve real roots on RP^1
        let candidates = d + 2;
        let psi = (0..candidates)
            .map(|i| std::f64::consts::PI * i as f64 / candidates as f64)
            .max_by(|a, b| {
                form.eval(a.cos(), a.sin())
                    .abs()
                    .total_cmp(&form.eval(b.cos(), b.sin()).abs())
            })
            .unwrap();
        let (s, c) = psi.sin_cos();
        let rotated = form.substitute(c, -s, s, c);
        let sc = rotated.scale();
        BinaryForm::new(rotated.coeffs.iter().map(|x| x / sc).collect())
    } else {
        form
    };
    let p: UniPoly = form.dehomogenize();
    let condition = p.discriminant_magnitude();
    CountResult {
        count: p.count_real_roots(),
        transversal: condition >= DISCRIMINANT_TOL,
        condition,
    }
}

/// `#(L ∩ g CP^{m+1})` for a hypersurface `L ⊂ RP^{2m+1}`: the real trace of
/// `g CP^{m+1}` is a projective line, on which `f` restricts to a binary form.
pub fn count_hypersurface_cap(locus: &ImplicitRealLocus, g: &GroupElement) -> Result<CountResult> {
    let [f] = locus.polys() else {
        return Err(Error::Unsupported(format!(
            "exact counts need a hypersurface, got {} equations",
            locus.polys().len()
        )));
    };
    let n = locus.n();
    if n % 2 == 0 {
        return Err(Error::Unsupported(format!(
            "hypersurface counts need n = 2m + 1, got n = {n}"
        )));
    }
    let m = (n - 1) / 2;
    let h = ComplexSubspace::coordinate(n - m, n)?.transformed(g)?;
    let trace = real_trace_of(&h);
    if !trace.is_generic() {
        return Ok(CountResult {
            count: 0,
            transversal: false,
            condition: 0.0,
        });
    }
    let form = restrict_to_projective_line(f, &trace.basis[0], &trace.basis[1])?;
    if form.scale() <= 1e-12 * f.coeff_scale() {
        // the whole line lies in the locus
        return Ok(CountResult {
            count: 0,
            transversal: false,
            condition: 0.0,
        });
    }
    let mut result = count_real_projective_roots(&form)?;
    let d = f.degree() as usize;
    let parity_ok = d % 2 == 0 || (result.count >= 1 && result.count % 2 == d % 2);
    if result.count > d || !parity_ok {
        result.transversal = false;
    }
    result.condition = result.condition.min(trace.condition);
    Ok(result)
}

/// `Π deg f_i`.
pub fn bezout_bound(locus: &ImplicitRealLocus) -> u64 {
    locus.degrees().iter().map(|&d| d as u64).product()
}
