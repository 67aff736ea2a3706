//! Hamiltonian functions on CP^n, their circle-invariant lift
//! `w = −2F·(i x) + H_F` to the unit sphere, and flows of meshed bodies.
//!
//! `F` is extended to C^{n+1} \ 0 with degree 0, so its Euclidean gradient at a
//! unit vector is horizontal. With `ω(v, w) = Im⟨v, w⟩` the Hamiltonian field
//! is `H_F = −i ∇F`, which makes `dF(v) = ω(H_F, v)` and `α(w) = −2F`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{domain, stream_rng};
use crate::numeric::{compensated_sum, small_det, wallis_integral};
use crate::projective::{alpha_raw, frame_isotropy, horizontal_part, omega_raw, CVec, TangentRep, C64, I};
use crate::submanifolds::SphereSubmanifold;

/// Largest tolerated `| |x| − 1 |` before a renormalization.
pub const DRIFT_LIMIT: f64 = 1e-6;
/// Relative tolerance for the volume lower bound along flows.
pub const VIOLATION_TOLERANCE: f64 = 1e-3;

/// A Hamiltonian family, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Constant {
        c: f64,
    },
    /// `z* A z / |z|²` with `A = re + i·im` Hermitian.
    Hermitian {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    /// `c · Re(z^a z̄^b) / |z|^{2d}` with `|a| = |b| = d`.
    MonomialRe {
        a: Vec<u32>,
        b: Vec<u32>,
        #[serde(default = "one")]
        c: f64,
    },
    Sum {
        terms: Vec<Family>,
    },
}

fn one() -> f64 {
    1.0
}

/// Piecewise-linear `s(t)` through `(t, s)` knots, constant outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, s0), (t1, s1)) = (w[0], w[1]);
            if t <= t1 {
                return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    /// `∫_0^t s`.
    pub fn integral(&self, t: f64) -> f64 {
        // exact for piecewise-linear s: trapezoids between breakpoints
        let mut points: Vec<f64> = vec![0.0];
        points.extend(self.knots.iter().map(|k| k.0).filter(|&x| x > 0.0 && x < t));
        points.push(t);
        points.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1]))).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

impl HamiltonianSpec {
    pub fn new(family: Family) -> Self {
        Self { family, schedule: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Family::Constant { c })
    }

    pub fn hermitian(re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> Self {
        Self::new(Family::Hermitian { re, im })
    }

    pub fn monomial_re(a: Vec<u32>, b: Vec<u32>) -> Self {
        Self::new(Family::MonomialRe { a, b, c: 1.0 })
    }

    pub fn with_schedule(mut self, knots: Vec<(f64, f64)>) -> Self {
        self.schedule = Some(Schedule { knots });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// The two built-in deforming specs for CP^2: a quartic monomial, and a
/// scheduled mix of a cubic monomial with a Hermitian form.
pub fn builtin_nonlinear_specs() -> Vec<(&'static str, HamiltonianSpec)> {
    let quartic = HamiltonianSpec::monomial_re(vec![2, 0, 0], vec![0, 2, 0]);
    let mixed = HamiltonianSpec::new(Family::Sum {
        terms: vec![
            Family::MonomialRe {
                a: vec![1, 1, 0],
                b: vec![0, 1, 1],
                c: 0.7,
            },
            Family::Hermitian {
                re: vec![vec![0.3, 0.1, 0.0], vec![0.1, -0.2, 0.15], vec![0.0, 0.15, 0.0]],
                im: Some(vec![vec![0.0, 0.2, 0.0], vec![-0.2, 0.0, -0.1], vec![0.0, 0.1, 0.0]]),
            },
        ],
    })
    .with_schedule(vec![(0.0, 1.0), (0.5, -0.5), (1.0, 1.5)]);
    vec![("monomial_quartic", quartic), ("mixed_scheduled", mixed)]
}

#[derive(Clone, Debug)]
enum Term {
    Constant(f64),
    Hermitian(Vec<C64>),
    MonomialRe { a: Vec<u32>, b: Vec<u32>, c: f64, d: u32 },
}

/// A validated Hamiltonian on CP^n.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n: usize,
    terms: Vec<Term>,
    schedule: Option<Schedule>,
    spec: HamiltonianSpec,
}

fn flatten(family: &Family, n: usize, out: &mut Vec<Term>) -> Result<()> {
    let len = n + 1;
    match family {
        Family::Constant { c } => out.push(Term::Constant(*c)),
        Family::Hermitian { re, im } => {
            let zero = vec![vec![0.0; len]; len];
            let im = im.as_ref().unwrap_or(&zero);
            if re.len() != len || im.len() != len || re.iter().chain(im).any(|r| r.len() != len) {
                return Err(Error::InvalidInput(format!("Hermitian matrix must be {len}×{len}")));
            }
            let mut a = Vec::with_capacity(len * len);
            for r in 0..len {
                for c in 0..len {
                    if (re[r][c] - re[c][r]).abs() > 1e-12 || (im[r][c] + im[c][r]).abs() > 1e-12 {
                        return Err(Error::InvalidInput(format!("matrix is not Hermitian at ({r}, {c})")));
                    }
                    a.push(C64::new(re[r][c], im[r][c]));
                }
            }
            out.push(Term::Hermitian(a));
        }
        Family::MonomialRe { a, b, c } => {
            if a.len() != len || b.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: if a.len() != len { a.len() } else { b.len() },
                });
            }
            let (da, db) = (a.iter().sum::<u32>(), b.iter().sum::<u32>());
            if da != db {
                return Err(Error::InvalidInput(format!(
                    "monomial_re needs equal total degrees for circle invariance, got {da} and {db}"
                )));
            }
            out.push(Term::MonomialRe {
                a: a.clone(),
                b: b.clone(),
                c: *c,
                d: da,
            });
        }
        Family::Sum { terms } => {
            for t in terms {
                flatten(t, n, out)?;
            }
        }
    }
    Ok(())
}

fn monomial(z: &[C64], a: &[u32], b: &[u32], skip_a: Option<usize>, skip_b: Option<usize>) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for (j, zj) in z.iter().enumerate() {
        let ea = a[j] - u32::from(skip_a == Some(j));
        let eb = b[j] - u32::from(skip_b == Some(j));
        if ea > 0 {
            p *= zj.powu(ea);
        }
        if eb > 0 {
            p *= zj.conj().powu(eb);
        }
    }
    p
}

impl Term {
    /// Value and Euclidean gradient at any nonzero `z`.
    fn eval(&self, z: &[C64]) -> (f64, Vec<C64>) {
        let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let len = z.len();
        match self {
            Term::Constant(c) => (*c, vec![C64::new(0.0, 0.0); len]),
            Term::Hermitian(a) => {
                let az: Vec<C64> = (0..len).map(|r| (0..len).map(|c| a[r * len + c] * z[c]).sum()).collect();
                let f = z.iter().zip(&az).map(|(zi, ai)| zi.conj() * ai).sum::<C64>().re / r2;
                let grad = az.iter().zip(z).map(|(ai, zi)| (ai - zi * f) * (2.0 / r2)).collect();
                (f, grad)
            }
            Term::MonomialRe { a, b, c, d } => {
                let g = monomial(z, a, b, None, None);
                let rd = r2.powi(*d as i32);
                let f = g.re / rd;
                let grad = (0..len)
                    .map(|j| {
                        let dz = if a[j] > 0 { monomial(z, a, b, Some(j), None) * a[j] as f64 } else { C64::new(0.0, 0.0) };
                        let dzb = if b[j] > 0 { monomial(z, a, b, None, Some(j)) * b[j] as f64 } else { C64::new(0.0, 0.0) };
                        (dzb + dz.conj()) / rd - z[j] * (2.0 * *d as f64 * f / r2)
                    })
                    .map(|v| v * *c)
                    .collect();
                (c * f, grad)
            }
        }
    }
}

impl Hamiltonian {
    /// Validates the spec for CP^n and runs the sign self-check.
    pub fn new(spec: &HamiltonianSpec, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("Hamiltonians live on CP^n with n ≥ 1".into()));
        }
        if let Some(s) = &spec.schedule {
            if s.knots.is_empty() || s.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::InvalidInput("schedule knots must be non-empty with increasing times".into()));
            }
        }
        let mut terms = Vec::new();
        flatten(&spec.family, n, &mut terms)?;
        let h = Self {
            n,
            terms,
            schedule: spec.schedule.clone(),
            spec: spec.clone(),
        };
        h.self_check()?;
        Ok(h)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    fn scale_at(&self, t: f64) -> f64 {
        self.schedule.as_ref().map_or(1.0, |s| s.value(t))
    }

    /// `∫_0^t s`, the effective time of a time-independent spec.
    pub fn schedule_integral(&self, t: f64) -> f64 {
        self.schedule.as_ref().map_or(t, |s| s.integral(t))
    }

    /// `F(x, t)` and `∇F(x, t)`.
    pub fn value_and_gradient(&self, x: &[C64], t: f64) -> (f64, Vec<C64>) {
        let s = self.scale_at(t);
        let mut f = 0.0;
        let mut grad = vec![C64::new(0.0, 0.0); x.len()];
        for term in &self.terms {
            let (v, g) = term.eval(x);
            f += v;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (s * f, grad.into_iter().map(|g| g * s).collect())
    }

    pub fn value(&self, x: &CVec, t: f64) -> f64 {
        self.value_and_gradient(x.as_slice(), t).0
    }

    fn field_raw(&self, x: &[C64], t: f64) -> Vec<C64> {
        let (f, grad) = self.value_and_gradient(x, t);
        // w = −2F·(i x) − i ∇F
        x.iter().zip(&grad).map(|(xi, gi)| -(I * xi * (2.0 * f)) - I * gi).collect()
    }

    /// Checks `α(H) = 0`, `dF(v) = ω(H, v)` and `α(w) = −2F` at random points.
    fn self_check(&self) -> Result<()> {
        let len = self.n + 1;
        for k in 0..8u64 {
            let mut rng = stream_rng(0x0048_414d, domain::SELF_CHECK, k);
            let mut gauss = || -> CVec {
                CVec::from_vec_unchecked(
                    (0..len)
                        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                        .collect(),
                )
            };
            let x = gauss().normalized()?;
            let v = horizontal_part(&x, &gauss());
            let t = 0.37 * k as f64;
            let hf = self.hamiltonian_vector(&x, t);
            let scale = 1.0 + hf.norm();
            let a = alpha_raw(&x, &hf);
            if a.abs() > 1e-8 * scale {
                return Err(Error::Configuration(format!("α(H_F) = {a:e} is not zero")));
            }
            let h = 1e-5;
            let fp = self.value(&(&x + &v.scale_real(h)).normalized()?, t);
            let fm = self.value(&(&x - &v.scale_real(h)).normalized()?, t);
            let df = (fp - fm) / (2.0 * h);
            let om = omega_raw(&hf, &v);
            if (df - om).abs() > 1e-6 * scale * (1.0 + v.norm()) {
                return Err(Error::Configuration(format!("dF(v) = {df} but ω(H_F, v) = {om}")));
            }
            let w = self.w_vector(&x, t);
            let f = self.value(&x, t);
            if (alpha_raw(&x, &w) + 2.0 * f).abs() > 1e-10 * (1.0 + f.abs()) * scale {
                return Err(Error::Configuration("α(w) ≠ −2F".into()));
            }
        }
        Ok(())
    }

    fn hamiltonian_vector(&self, x: &CVec, t: f64) -> CVec {
        let (_, grad) = self.value_and_gradient(x.as_slice(), t);
        CVec::from_vec_unchecked(grad.into_iter().map(|g| -I * g).collect())
    }

    fn w_vector(&self, x: &CVec, t: f64) -> CVec {
        CVec::from_vec_unchecked(self.field_raw(x.as_slice(), t))
    }

    fn check_point(&self, x: &CVec) -> Result<()> {
        if x.len() != self.n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n + 1,
                got: x.len(),
            });
        }
        x.check_unit()
    }
}

/// The Hamiltonian vector field `H_F = −i ∇F` at a unit vector.
pub fn hamiltonian_field(h: &Hamiltonian, x: &CVec, t: f64) -> Result<TangentRep> {
    h.check_point(x)?;
    TangentRep::horizontal(x.clone(), h.hamiltonian_vector(x, t))
}

/// The lifted field `w = −2F·(i x) + H_F`, tangent to the sphere.
pub fn w_field(h: &Hamiltonian, x: &CVec, t: f64) -> Result<TangentRep> {
    h.check_point(x)?;
    TangentRep::spherical(x.clone(), h.w_vector(x, t))
}

/// A chart grid carried along a flow. Non-periodic axes carry two ghost
/// layers on each side so fourth-order central differences reach every
/// interior node.
#[derive(Clone, Debug)]
pub struct FlowMesh {
    dims: Vec<usize>,
    ghosts: Vec<usize>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    multiplicity: f64,
    points: Vec<CVec>,
}

const GHOSTS: usize = 2;

impl FlowMesh {
    /// Samples the single parametric chart of `body` on its midpoint grid,
    /// refined by `scale`.
    pub fn from_body(body: &SphereSubmanifold, scale: usize) -> Result<Self> {
        let [chart] = body.charts() else {
            return Err(Error::Unsupported("flow meshes need a single-chart body".into()));
        };
        if !chart.is_parametric() {
            return Err(Error::Unsupported("flow meshes need a parametric chart".into()));
        }
        let dims: Vec<usize> = chart.resolution.iter().map(|r| r * scale).collect();
        let ghosts: Vec<usize> = chart.periodic.iter().map(|&p| if p { 0 } else { GHOSTS }).collect();
        let spacing: Vec<f64> = chart
            .domain
            .iter()
            .zip(&dims)
            .map(|(&(lo, hi), &r)| (hi - lo) / r as f64)
            .collect();
        let full: Vec<usize> = dims.iter().zip(&ghosts).map(|(d, g)| d + 2 * g).collect();
        let total: usize = full.iter().product();
        let points = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, &full);
                let u: Vec<f64> = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| chart.domain[a].0 + (i as f64 - ghosts[a] as f64 + 0.5) * spacing[a])
                    .collect();
                chart.point(&u).expect("parametric")
            })
            .collect();
        Ok(Self {
            dims,
            ghosts,
            periodic: chart.periodic.clone(),
            spacing,
            multiplicity: chart.multiplicity,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn interior_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn points(&self) -> &[CVec] {
        &self.points
    }

    fn full_dims(&self) -> Vec<usize> {
        self.dims.iter().zip(&self.ghosts).map(|(d, g)| d + 2 * g).collect()
    }

    fn interior_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Full-grid index of interior node `k` shifted by `offset` along `axis`.
    fn index(&self, interior: &[usize], axis: usize, offset: isize) -> usize {
        let full = self.full_dims();
        let mut flat = 0;
        for a in 0..self.dim() {
            let mut i = interior[a] as isize + self.ghosts[a] as isize;
            if a == axis {
                i += offset;
                if self.periodic[a] {
                    i = i.rem_euclid(full[a] as isize);
                }
            }
            flat = flat * full[a] + i as usize;
        }
        flat
    }

    /// The point at an interior node.
    pub fn point_at(&self, interior: &[usize]) -> &CVec {
        &self.points[self.index(interior, 0, 0)]
    }

    /// Fourth-order central difference along every axis at an interior node,
    /// with spacing `stride · h`.
    fn tangents_at(&self, interior: &[usize], stride: isize) -> Vec<CVec> {
        (0..self.dim())
            .map(|a| {
                let p = |o: isize| &self.points[self.index(interior, a, o * stride)];
                let mut t = (p(1) - p(-1)).scale_real(8.0);
                t = &t - &(p(2) - p(-2));
                t.scale_real(1.0 / (12.0 * self.spacing[a] * stride as f64))
            })
            .collect()
    }

    fn interior_nodes(&self) -> impl IndexedParallelIterator<Item = Vec<usize>> + '_ {
        (0..self.interior_count()).into_par_iter().map(|k| unflatten(k, &self.dims))
    }

    /// Round-metric volume by fourth-order difference Jacobians on the
    /// midpoint grid.
    pub fn sphere_volume(&self, t: f64) -> Result<f64> {
        let elems = self
            .interior_nodes()
            .map(|idx| {
                let tangents = self.tangents_at(&idx, 1);
                gram_root(&tangents).ok_or(Error::JacobianRankLoss { t, node: idx })
            })
            .collect::<Result<Vec<f64>>>()?;
        let cell: f64 = self.spacing.iter().product();
        Ok(compensated_sum(elems) * cell * self.multiplicity)
    }

    /// Max over nodes and axes of `|α(tangent)| / |tangent|`, plus the
    /// difference-truncation level of the same tangents (estimated from the
    /// stencil at twice the spacing).
    pub fn horizontality(&self) -> HorizontalityReport {
        let per_node: Vec<(f64, f64)> = self
            .interior_nodes()
            .map(|idx| {
                let x = self.point_at(&idx);
                let fine = self.tangents_at(&idx, 1);
                let coarse = self.tangents_at(&idx, 2);
                let mut defect: f64 = 0.0;
                let mut floor: f64 = 0.0;
                for (f, c) in fine.iter().zip(&coarse) {
                    let len = f.norm();
                    defect = defect.max(alpha_raw(x, f).abs() / len);
                    floor = floor.max((f - c).norm() / 15.0 / len);
                }
                (defect, floor)
            })
            .collect();
        HorizontalityReport {
            defect: per_node.iter().map(|p| p.0).fold(0.0, f64::max),
            truncation: per_node.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }

    /// Largest `|ω|` on orthonormalized horizontal tangent frames.
    pub fn isotropy(&self) -> f64 {
        if self.dim() < 2 {
            return 0.0;
        }
        self.interior_nodes()
            .map(|idx| frame_isotropy(self.point_at(&idx), &self.tangents_at(&idx, 1)).unwrap_or(f64::INFINITY))
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `| |x| − 1 |` over the mesh.
    pub fn norm_drift(&self) -> f64 {
        self.points.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest pointwise distance to another mesh with the same layout.
    pub fn max_distance(&self, other: &FlowMesh) -> f64 {
        self.points.iter().zip(&other.points).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// The suspension `(sin θ · x, cos θ)`, θ ∈ (0, π) on `theta_res` midpoints.
    pub fn suspended(&self, theta_res: usize) -> FlowMesh {
        let h = std::f64::consts::PI / theta_res as f64;
        let full_theta = theta_res + 2 * GHOSTS;
        let mut points = Vec::with_capacity(full_theta * self.points.len());
        for i in 0..full_theta {
            let (s, c) = ((i as f64 - GHOSTS as f64 + 0.5) * h).sin_cos();
            points.extend(self.points.iter().map(|p| p.scale_real(s).extended(C64::new(c, 0.0))));
        }
        let mut dims = vec![theta_res];
        dims.extend_from_slice(&self.dims);
        let mut ghosts = vec![GHOSTS];
        ghosts.extend_from_slice(&self.ghosts);
        let mut periodic = vec![false];
        periodic.extend_from_slice(&self.periodic);
        let mut spacing = vec![h];
        spacing.extend_from_slice(&self.spacing);
        FlowMesh {
            dims,
            ghosts,
            periodic,
            spacing,
            multiplicity: self.multiplicity,
            points,
        }
    }

    /// For a one-dimensional periodic mesh: the Fubini–Study length of the
    /// closed polygon through the first half of the nodes, i.e. of the
    /// projected curve when the mesh is antipodally symmetric.
    pub fn projected_half_length(&self) -> Result<f64> {
        if self.dim() != 1 || !self.periodic[0] || self.dims[0] % 2 != 0 {
            return Err(Error::Unsupported("polygon length needs an even periodic 1-dimensional mesh".into()));
        }
        let half = self.dims[0] / 2;
        let pts: Vec<crate::projective::ProjPoint> = self.points[..half]
            .iter()
            .map(|p| crate::projective::ProjPoint::new(p.clone()))
            .collect::<Result<_>>()?;
        let mut lengths = Vec::with_capacity(half);
        for i in 0..half {
            lengths.push(crate::projective::fs_distance(&pts[i], &pts[(i + 1) % half])?);
        }
        Ok(compensated_sum(lengths))
    }
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    idx
}

fn gram_root(tangents: &[CVec]) -> Option<f64> {
    let d = tangents.len();
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = tangents[i].real_dot(&tangents[j]);
        }
    }
    let diag: f64 = (0..d).map(|i| g[i * d + i]).product();
    let det = small_det(g, d);
    (diag > 0.0 && det / diag > 1e-14).then(|| det.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizontalityReport {
    /// Max `|α(t)| / |t|` over difference tangents.
    pub defect: f64,
    /// Estimated relative truncation error of those tangents.
    pub truncation: f64,
}

/// A mesh at time `t`, with the largest per-step renormalization drift seen so far.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub mesh: FlowMesh,
    pub max_step_drift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Number of equal intervals between emitted states.
    pub checkpoints: usize,
    /// Refinement of the body's chart resolution for the mesh.
    pub mesh_scale: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            t_max: 1.0,
            dt: 1e-3,
            checkpoints: 10,
            mesh_scale: 16,
        }
    }
}

/// Horizontality required of an initial body.
const INITIAL_DEFECT_LIMIT: f64 = 1e-6;

fn rk4_step(h: &Hamiltonian, x: &[C64], t: f64, dt: f64) -> Vec<C64> {
    let add = |a: &[C64], k: &[C64], s: f64| -> Vec<C64> { a.iter().zip(k).map(|(p, q)| p + q * s).collect() };
    let k1 = h.field_raw(x, t);
    let k2 = h.field_raw(&add(x, &k1, 0.5 * dt), t + 0.5 * dt);
    let k3 = h.field_raw(&add(x, &k2, 0.5 * dt), t + 0.5 * dt);
    let k4 = h.field_raw(&add(x, &k3, dt), t + dt);
    x.iter()
        .enumerate()
        .map(|(i, p)| p + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

/// Integrates every mesh point under `w` with classic RK4 and per-step
/// renormalization. Returns states at `t = 0` and at each checkpoint.
pub fn integrate_flow(body: &SphereSubmanifold, h: &Hamiltonian, config: &FlowConfig) -> Result<Vec<FlowState>> {
    let mesh = FlowMesh::from_body(body, config.mesh_scale)?;
    integrate_mesh(mesh, h, config)
}

pub fn integrate_mesh(mesh: FlowMesh, h: &Hamiltonian, config: &FlowConfig) -> Result<Vec<FlowState>> {
    if !(config.dt > 0.0) || !(config.t_max >= 0.0) || config.checkpoints == 0 {
        return Err(Error::InvalidInput("need dt > 0, t_max ≥ 0 and at least one checkpoint".into()));
    }
    if mesh.points[0].len() != h.n() + 1 {
        return Err(Error::DimensionMismatch {
            expected: h.n() + 1,
            got: mesh.points[0].len(),
        });
    }
    let initial = mesh.horizontality().defect;
    if initial > INITIAL_DEFECT_LIMIT {
        return Err(Error::NotHorizontal(initial));
    }
    let per_checkpoint = ((config.t_max / config.dt / config.checkpoints as f64).round() as usize).max(1);
    let steps = per_checkpoint * config.checkpoints;
    let dt = config.t_max / steps as f64;
    // points are independent, so each runs its whole trajectory in one task
    let trajectories = mesh
        .points
        .par_iter()
        .map(|p| {
            let mut x = p.as_slice().to_vec();
            let mut snapshots = Vec::with_capacity(config.checkpoints);
            let mut worst = 0.0f64;
            for step in 0..steps {
                let t = step as f64 * dt;
                let y = rk4_step(h, &x, t, dt);
                let norm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let drift = (norm - 1.0).abs();
                if !(drift <= DRIFT_LIMIT) {
                    return Err(Error::StepSize { t: t + dt, drift });
                }
                worst = worst.max(drift);
                x = y.into_iter().map(|c| c / norm).collect();
                if (step + 1) % per_checkpoint == 0 {
                    snapshots.push((CVec::from_vec_unchecked(x.clone()), worst));
                }
            }
            Ok(snapshots)
        })
        .collect::<Vec<Result<_>>>();
    let mut first_error: Option<Error> = None;
    let mut columns = Vec::with_capacity(trajectories.len());
    for tr in trajectories {
        match tr {
            Ok(s) => columns.push(s),
            Err(e) => {
                let earlier = match (&first_error, &e) {
                    (Some(Error::StepSize { t: t0, .. }), Error::StepSize { t, .. }) => t < t0,
                    (None, _) => true,
                    _ => false,
                };
                if earlier {
                    first_error = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let mut states = vec![FlowState {
        t: 0.0,
        mesh: mesh.clone(),
        max_step_drift: 0.0,
    }];
    let mut drift_so_far = 0.0f64;
    for c in 0..config.checkpoints {
        let mut next = mesh.clone();
        let mut drift = 0.0f64;
        for (slot, col) in next.points.iter_mut().zip(&columns) {
            *slot = col[c].0.clone();
            drift = drift.max(col[c].1);
        }
        drift_so_far = drift_so_far.max(drift);
        states.push(FlowState {
            t: (c + 1) as f64 * per_checkpoint as f64 * dt,
            mesh: next,
            max_step_drift: drift_so_far,
        });
    }
    Ok(states)
}

pub fn horizontality_monitor(state: &FlowState) -> HorizontalityReport {
    state.mesh.horizontality()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VolumeSample {
    pub t: f64,
    pub sphere_volume: f64,
    /// Half the sphere volume: the Hopf map is 2:1 on horizontal lifts of
    /// real projective spaces.
    pub projected_volume: f64,
}

pub fn volume_along_flow(states: &[FlowState]) -> Result<Vec<VolumeSample>> {
    states
        .iter()
        .map(|s| {
            let v = s.mesh.sphere_volume(s.t)?;
            Ok(VolumeSample {
                t: s.t,
                sphere_volume: v,
                projected_volume: v / 2.0,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuspensionCheck {
    pub t: f64,
    pub sphere_volume: f64,
    pub suspended_volume: f64,
    /// `∫_0^π sin^{2m−1}`.
    pub wallis_factor: f64,
    pub relative_error: f64,
    /// Isotropy defect of the suspended mesh.
    pub isotropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizationCheck {
    pub m: usize,
    pub reference_volume: f64,
    pub min_projected_volume: f64,
    pub holds: bool,
    /// First checkpoint below `reference · (1 − tolerance)`.
    pub offending_t: Option<f64>,
    pub suspension: Vec<SuspensionCheck>,
}

/// Checks `projected_volume(t) ≥ vol(RP^{2m−1})·(1 − 1e−3)` at every state and
/// the suspension identity `vol(ΣS_t) = vol(S_t) · ∫ sin^{2m−1}`.
pub fn check_minimization(states: &[FlowState], m: usize, theta_res: usize) -> Result<MinimizationCheck> {
    if m < 1 {
        return Err(Error::InvalidInput("m ≥ 1".into()));
    }
    if let Some(s) = states.first() {
        if s.mesh.dim() != 2 * m - 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * m - 1,
                got: s.mesh.dim(),
            });
        }
    }
    let reference = crate::numeric::sphere_volume(2 * m - 1) / 2.0;
    let volumes = volume_along_flow(states)?;
    let min_projected_volume = volumes.iter().map(|v| v.projected_volume).fold(f64::INFINITY, f64::min);
    let offending_t = volumes
        .iter()
        .find(|v| v.projected_volume < reference * (1.0 - VIOLATION_TOLERANCE))
        .map(|v| v.t);
    let wallis = wallis_integral(2 * m - 1);
    let suspension = states
        .iter()
        .zip(&volumes)
        .map(|(s, v)| {
            let sus = s.mesh.suspended(theta_res);
            let sv = sus.sphere_volume(s.t)?;
            Ok(SuspensionCheck {
                t: s.t,
                sphere_volume: v.sphere_volume,
                suspended_volume: sv,
                wallis_factor: wallis,
                relative_error: (sv - v.sphere_volume * wallis).abs() / (v.sphere_volume * wallis),
                isotropy: sus.isotropy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MinimizationCheck {
        m,
        reference_volume: reference,
        min_projected_volume,
        holds: offending_t.is_none(),
        offending_t,
        suspension,
    })
}

/// Observed order `log2(|X_h − X_{h/2}| / |X_{h/2} − X_{h/4}|)` of the
/// integrator from three runs with halved steps.
pub fn observed_order(body: &SphereSubmanifold, h: &Hamiltonian, t_max: f64, dt: f64, mesh_scale: usize) -> Result<f64> {
    let run = |step: f64| -> Result<FlowMesh> {
        let cfg = FlowConfig {
            t_max,
            dt: step,
            checkpoints: 1,
            mesh_scale,
        };
        Ok(integrate_flow(body, h, &cfg)?.pop().expect("final state").mesh)
    };
    let a = run(dt)?;
    let b = run(dt / 2.0)?;
    let c = run(dt / 4.0)?;
    Ok((a.max_distance(&b) / b.max_distance(&c)).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submanifolds::{hopf_fiber, round_sphere};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn diag_spec() -> HamiltonianSpec {
        HamiltonianSpec::hermitian(vec![vec![0.5, 0.0], vec![0.0, -0.5]], None)
    }

    #[test]
    fn constant_field_vanishes() {
        let h = Hamiltonian::new(&HamiltonianSpec::constant(2.0), 2).unwrap();
        let x = CVec::from_pairs(&[(0.6, 0.0), (0.0, 0.8), (0.0, 0.0)]).unwrap();
        let hf = hamiltonian_field(&h, &x, 0.0).unwrap();
        assert!(hf.vec.norm() < 1e-15);
        let w = w_field(&h, &x, 0.0).unwrap();
        assert!((&w.vec - &x.mul_i().scale_real(-4.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_hamiltonian_gives_zero_field() {
        let h = Hamiltonian::new(&HamiltonianSpec::constant(0.0), 1).unwrap();
        let x = CVec::basis(2, 0);
        assert_eq!(w_field(&h, &x, 0.3).unwrap().vec.norm(), 0.0);
    }

    #[test]
    fn hermitian_gradient_direction() {
        let h = Hamiltonian::new(&diag_spec(), 1).unwrap();
        let x = CVec::from_pairs(&[(0.8, 0.0), (0.0, 0.6)]).unwrap();
        let f = h.value(&x, 0.0);
        assert!((f - 0.5 * (0.64 - 0.36)).abs() < 1e-14);
        let hf = hamiltonian_field(&h, &x, 0.0).unwrap();
        // −i·2(A − F)x
        let a = CVec::from_pairs(&[(0.4, 0.0), (0.0, -0.3)]).unwrap();
        let expected = (&a - &x.scale_real(f)).scale(C64::new(0.0, -2.0));
        assert!((&hf.vec - &expected).norm() < 1e-14);
        assert!(hf.alpha().unwrap().abs() < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(Hamiltonian::new(&HamiltonianSpec::monomial_re(vec![2, 0, 0], vec![0, 1, 0]), 2).is_err());
        let not_herm = HamiltonianSpec::hermitian(vec![vec![0.0, 1.0], vec![0.0, 0.0]], None);
        assert!(Hamiltonian::new(&not_herm, 1).is_err());
        assert!(Hamiltonian::new(&diag_spec(), 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        for (_, spec) in builtin_nonlinear_specs() {
            let back = HamiltonianSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(back, spec);
        }
        let parsed = HamiltonianSpec::from_json(r#"{"family": "constant", "c": 1.5}"#).unwrap();
        assert_eq!(parsed, HamiltonianSpec::constant(1.5));
    }

    #[test]
    fn alpha_of_w_is_minus_two_f() {
        for (_, spec) in builtin_nonlinear_specs() {
            let h = Hamiltonian::new(&spec, 2).unwrap();
            for k in 0..20 {
                let x = CVec::from_pairs(&[(0.3, 0.1 * k as f64), (-0.5, 0.2), (0.1, -0.7)]).unwrap().normalized().unwrap();
                let t = 0.05 * k as f64;
                let w = w_field(&h, &x, t).unwrap();
                assert!((w.alpha().unwrap() + 2.0 * h.value(&x, t)).abs() < 1e-10);
                assert!(hamiltonian_field(&h, &x, t).unwrap().alpha().unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn schedule_integral_is_exact() {
        let s = Schedule {
            knots: vec![(0.0, 1.0), (0.5, -0.5), (1.0, 1.5)],
        };
        assert!((s.integral(1.0) - (0.5 * 0.25 + 0.5 * 0.5)).abs() < 1e-15);
        assert!((s.integral(0.25) - 0.25 * 0.625).abs() < 1e-15);
    }

    fn s1_lift() -> SphereSubmanifold {
        round_sphere(1, 2).unwrap()
    }

    fn config(t_max: f64, dt: f64) -> FlowConfig {
        FlowConfig {
            t_max,
            dt,
            checkpoints: 4,
            mesh_scale: 16,
        }
    }

    #[test]
    fn hermitian_flow_matches_matrix_exponential() {
        let re = vec![vec![0.3, 0.1, 0.0], vec![0.1, -0.2, 0.15], vec![0.0, 0.15, 0.0]];
        let im = vec![vec![0.0, 0.2, 0.0], vec![-0.2, 0.0, -0.1], vec![0.0, 0.1, 0.0]];
        let spec = HamiltonianSpec::hermitian(re.clone(), Some(im.clone())).with_schedule(vec![(0.0, 1.0), (1.0, -1.0)]);
        let h = Hamiltonian::new(&spec, 2).unwrap();
        let states = integrate_flow(&s1_lift(), &h, &config(1.0, 1e-2)).unwrap();
        let a = DMatrix::from_fn(3, 3, |r, c| C64::new(re[r][c], im[r][c]));
        for s in &states {
            let u = (a.clone() * C64::new(0.0, -2.0 * h.schedule_integral(s.t))).exp();
            let x0 = &states[0].mesh;
            for (p0, p) in x0.points().iter().zip(s.mesh.points()) {
                let v = nalgebra::DVector::from_column_slice(p0.as_slice());
                let expect = &u * v;
                let err = p.iter().zip(expect.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-6, "t = {}: {err:e}", s.t);
            }
        }
    }

    #[test]
    fn initial_volume_and_half_length() {
        let mesh = FlowMesh::from_body(&s1_lift(), 16).unwrap();
        assert!((mesh.sphere_volume(0.0).unwrap() - 2.0 * PI).abs() < 1e-6);
        assert!((mesh.projected_half_length().unwrap() - PI).abs() < 1e-4);
        assert_eq!(mesh.horizontality().defect, 0.0);
    }

    #[test]
    fn constant_flow_fixes_projected_points() {
        let h = Hamiltonian::new(&HamiltonianSpec::constant(0.8), 2).unwrap();
        let states = integrate_flow(&s1_lift(), &h, &config(1.0, 1e-3)).unwrap();
        let v = volume_along_flow(&states).unwrap();
        for (s, vol) in states.iter().zip(&v) {
            for (p0, p) in states[0].mesh.points().iter().zip(s.mesh.points()) {
                let (a, b) = (crate::projective::ProjPoint::new(p0.clone()).unwrap(), crate::projective::ProjPoint::new(p.clone()).unwrap());
                assert!(crate::projective::fs_distance(&a, &b).unwrap() < 1e-8);
            }
            assert!((vol.projected_volume - v[0].projected_volume).abs() < 1e-8);
        }
    }

    #[test]
    fn vertical_body_is_flagged() {
        let fibre = hopf_fiber(&CVec::basis(3, 0)).unwrap();
        let mesh = FlowMesh::from_body(&fibre, 4).unwrap();
        assert!((mesh.horizontality().defect - 1.0).abs() < 1e-6);
        let h = Hamiltonian::new(&HamiltonianSpec::constant(1.0), 2).unwrap();
        assert!(matches!(integrate_flow(&fibre, &h, &config(0.1, 0.01)), Err(Error::NotHorizontal(_))));
    }

    #[test]
    fn huge_steps_are_rejected() {
        let (_, spec) = &builtin_nonlinear_specs()[0];
        let h = Hamiltonian::new(spec, 2).unwrap();
        let err = integrate_flow(&s1_lift(), &h, &FlowConfig { t_max: 1.0, dt: 0.5, checkpoints: 2, mesh_scale: 2 });
        assert!(matches!(err, Err(Error::StepSize { .. })), "{err:?}");
    }

    #[test]
    fn circle_equivariance() {
        let (_, spec) = &builtin_nonlinear_specs()[1];
        let h = Hamiltonian::new(spec, 2).unwrap();
        let mesh = FlowMesh::from_body(&s1_lift(), 2).unwrap();
        let mut rotated = mesh.clone();
        let phase = C64::from_polar(1.0, 0.9);
        for p in &mut rotated.points {
            *p = p.scale(phase);
        }
        let cfg = FlowConfig { t_max: 0.5, dt: 1e-3, checkpoints: 1, mesh_scale: 2 };
        let a = integrate_mesh(mesh, &h, &cfg).unwrap().pop().unwrap().mesh;
        let b = integrate_mesh(rotated, &h, &cfg).unwrap().pop().unwrap().mesh;
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((&p.scale(phase) - q).norm() < 1e-10);
        }
    }

    #[test]
    fn suspension_of_mesh() {
        let mesh = FlowMesh::from_body(&s1_lift(), 16).unwrap();
        let sus = mesh.suspended(128);
        let v = sus.sphere_volume(0.0).unwrap();
        assert!((v - 4.0 * PI).abs() / (4.0 * PI) < 1e-3);
        assert!(sus.isotropy() < 1e-12);
    }
}
