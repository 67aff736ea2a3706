//! Charted submanifolds of CP^n and S^{2n+1}, their Riemannian volumes by
//! midpoint quadrature, the suspension construction, and chart covers of
//! real hypersurface loci.
//!
//! A chart maps a box of R^d into the unit sphere of C^{n+1}. Volumes of
//! bodies in CP^n use the Fubini–Study metric, i.e. the Gram matrix of the
//! horizontal parts of the chart tangents; bodies in the sphere use the
//! ambient Euclidean Gram matrix.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::haar::{domain, stream_rng, GroupElement};
use crate::numeric::{compensated_sum, small_det, CompensatedSum};
use crate::polynomial::{HomogeneousPoly, ImplicitRealLocus};
use crate::projective::{horizontal_part, CVec, C64};

/// Default midpoint counts per axis. Bounded polar axes pick up Richardson
/// extrapolation; periodic axes are integrated spectrally by the midpoint rule.
pub const POLAR_RESOLUTION: usize = 24;
pub const AZIMUTH_RESOLUTION: usize = 16;
pub const PHASE_RESOLUTION: usize = 8;
pub const SUSPENSION_RESOLUTION: usize = 24;

/// Central-difference step for chart tangents.
const FD_STEP: f64 = 1e-5;

/// Nodes per quadrature work unit. Fixed so the reduction order never depends
/// on the thread count.
const CHUNK: usize = 2048;

/// Threshold on det(G)/Π G_ii below which the tangents count as dependent.
const GRAM_RANK_TOL: f64 = 1e-14;

pub type ParamFn = Arc<dyn Fn(&[f64]) -> CVec + Send + Sync>;

/// One point of a body over a chart parameter, with its tangent frame and a
/// quadrature weight (1 except for partition-of-unity charts).
#[derive(Clone, Debug)]
pub struct ChartSample {
    pub point: CVec,
    pub tangents: Vec<CVec>,
    pub weight: f64,
}

#[derive(Clone)]
enum ChartKind {
    Parametric(ParamFn),
    Implicit(Arc<ProjectionGraph>),
}

#[derive(Clone)]
pub struct Chart {
    kind: ChartKind,
    pub label: String,
    pub domain: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
    pub periodic: Vec<bool>,
    /// Rational weight of the chart (covers, overlaps).
    pub multiplicity: f64,
    transform: Option<Arc<GroupElement>>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("resolution", &self.resolution)
            .field("periodic", &self.periodic)
            .field("multiplicity", &self.multiplicity)
            .finish()
    }
}

impl Chart {
    pub fn parametric(
        label: impl Into<String>,
        domain: Vec<(f64, f64)>,
        resolution: Vec<usize>,
        periodic: Vec<bool>,
        multiplicity: f64,
        map: ParamFn,
    ) -> Self {
        assert_eq!(domain.len(), resolution.len());
        assert_eq!(domain.len(), periodic.len());
        Self {
            kind: ChartKind::Parametric(map),
            label: label.into(),
            domain,
            resolution,
            periodic,
            multiplicity,
            transform: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.kind, ChartKind::Parametric(_))
    }

    /// The chart point over `u`, for parametric charts.
    pub fn point(&self, u: &[f64]) -> Option<CVec> {
        match &self.kind {
            ChartKind::Parametric(f) => Some(self.apply_transform(f(u))),
            ChartKind::Implicit(_) => None,
        }
    }

    fn apply_transform(&self, v: CVec) -> CVec {
        match &self.transform {
            Some(g) => g.apply(&v),
            None => v,
        }
    }

    /// Points over `u` with tangent frames.
    pub fn samples(&self, u: &[f64]) -> Result<Vec<ChartSample>> {
        let raw = match &self.kind {
            ChartKind::Parametric(f) => vec![parametric_sample(f.as_ref(), u)],
            ChartKind::Implicit(graph) => graph.samples(u)?,
        };
        Ok(match &self.transform {
            None => raw,
            Some(g) => raw
                .into_iter()
                .map(|s| ChartSample {
                    point: g.apply(&s.point),
                    tangents: s.tangents.iter().map(|t| g.apply(t)).collect(),
                    weight: s.weight,
                })
                .collect(),
        })
    }

    /// Splits the domain in half along `axis`.
    pub fn split(&self, axis: usize) -> (Chart, Chart) {
        let (lo, hi) = self.domain[axis];
        let mid = 0.5 * (lo + hi);
        let mut left = self.clone();
        let mut right = self.clone();
        left.domain[axis] = (lo, mid);
        right.domain[axis] = (mid, hi);
        left.periodic[axis] = false;
        right.periodic[axis] = false;
        let half = (self.resolution[axis] / 2).max(1);
        left.resolution[axis] = half;
        right.resolution[axis] = half;
        left.label = format!("{}[{axis}<]", self.label);
        right.label = format!("{}[{axis}>]", self.label);
        (left, right)
    }

    fn node_count(&self, scale: usize) -> usize {
        self.resolution.iter().map(|r| r * scale).product()
    }

    /// Multi-index and parameter of node `flat` on the grid refined by `scale`.
    fn node(&self, flat: usize, scale: usize) -> (Vec<usize>, Vec<f64>) {
        let mut rest = flat;
        let mut idx = vec![0; self.dim()];
        let mut u = vec![0.0; self.dim()];
        for a in (0..self.dim()).rev() {
            let r = self.resolution[a] * scale;
            idx[a] = rest % r;
            rest /= r;
            let (lo, hi) = self.domain[a];
            u[a] = lo + (idx[a] as f64 + 0.5) * (hi - lo) / r as f64;
        }
        (idx, u)
    }

    fn cell_volume(&self, scale: usize) -> f64 {
        self.domain
            .iter()
            .zip(&self.resolution)
            .map(|(&(lo, hi), &r)| (hi - lo) / (r * scale) as f64)
            .product()
    }
}

fn parametric_sample(f: &(dyn Fn(&[f64]) -> CVec + Send + Sync), u: &[f64]) -> ChartSample {
    let point = f(u);
    let mut v = u.to_vec();
    let tangents = (0..u.len())
        .map(|a| {
            v[a] = u[a] + FD_STEP;
            let plus = f(&v);
            v[a] = u[a] - FD_STEP;
            let minus = f(&v);
            v[a] = u[a];
            (&plus - &minus).scale_real(0.5 / FD_STEP)
        })
        .collect();
    ChartSample {
        point,
        tangents,
        weight: 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Fubini–Study on CP^n through horizontal lifts.
    FubiniStudy,
    /// Round metric of the unit sphere.
    Sphere,
}

/// A volume with its Richardson error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    /// Richardson extrapolation `(4 I(2r) − I(r)) / 3`.
    pub value: f64,
    /// `|I(2r) − I(r)| / 3` plus a 1e-12 relative roundoff floor.
    pub error: f64,
    pub coarse: f64,
    pub fine: f64,
}

/// Volume element `√det G` for a tangent frame, with the rank check.
fn volume_element(point: &CVec, tangents: &[CVec], metric: Metric) -> Option<f64> {
    let d = tangents.len();
    if d == 0 {
        return Some(1.0);
    }
    let frame: Vec<CVec> = match metric {
        Metric::FubiniStudy => tangents.iter().map(|t| horizontal_part(point, t)).collect(),
        Metric::Sphere => tangents.to_vec(),
    };
    let mut gram = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let g = frame[i].real_dot(&frame[j]);
            gram[i * d + j] = g;
            gram[j * d + i] = g;
        }
    }
    let diag: f64 = (0..d).map(|i| gram[i * d + i]).product();
    if !(diag > 0.0) {
        return None;
    }
    let det = small_det(gram, d);
    if !(det / diag > GRAM_RANK_TOL) {
        return None;
    }
    Some(det.sqrt())
}

fn integrate_chart(chart: &Chart, metric: Metric, scale: usize) -> Result<f64> {
    let nodes = chart.node_count(scale);
    let chunks = nodes.div_ceil(CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = CompensatedSum::new();
            for flat in c * CHUNK..((c + 1) * CHUNK).min(nodes) {
                let (idx, u) = chart.node(flat, scale);
                for sample in chart.samples(&u)? {
                    if sample.weight == 0.0 {
                        continue;
                    }
                    let elem = volume_element(&sample.point, &sample.tangents, metric).ok_or_else(|| {
                        Error::DegenerateGram {
                            chart: chart.label.clone(),
                            node: idx.clone(),
                        }
                    })?;
                    acc.add(sample.weight * elem);
                }
            }
            Ok(acc.value())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(partials) * chart.cell_volume(scale) * chart.multiplicity)
}

#[derive(Clone, Debug)]
struct Atlas {
    charts: Vec<Chart>,
    dim: usize,
    ambient_n: usize,
}

impl Atlas {
    fn new(charts: Vec<Chart>, dim: usize, ambient_n: usize) -> Self {
        debug_assert!(charts.iter().all(|c| c.dim() == dim));
        Self {
            charts,
            dim,
            ambient_n,
        }
    }

    fn integrate(&self, metric: Metric, scale: usize) -> Result<f64> {
        let parts = self
            .charts
            .iter()
            .map(|c| integrate_chart(c, metric, scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(compensated_sum(parts))
    }

    fn volume(&self, metric: Metric) -> Result<VolumeEstimate> {
        let coarse = self.integrate(metric, 1)?;
        let fine = self.integrate(metric, 2)?;
        let value = (4.0 * fine - coarse) / 3.0;
        Ok(VolumeEstimate {
            value,
            error: (fine - coarse).abs() / 3.0 + 1e-12 * value.abs(),
            coarse,
            fine,
        })
    }

    fn transformed(&self, g: &GroupElement) -> Result<Self> {
        if g.dim() != self.ambient_n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_n + 1,
                got: g.dim(),
            });
        }
        let charts = self
            .charts
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.transform = Some(Arc::new(match &c.transform {
                    Some(h) => g.compose(h),
                    None => g.clone(),
                }));
                c
            })
            .collect();
        Ok(Self::new(charts, self.dim, self.ambient_n))
    }

    fn with_resolution_scale(&self, factor: usize) -> Self {
        let mut out = self.clone();
        for c in &mut out.charts {
            for r in &mut c.resolution {
                *r *= factor;
            }
        }
        out
    }

    fn split_chart(&self, index: usize, axis: usize) -> Self {
        let mut charts = self.charts.clone();
        let (a, b) = charts.remove(index).split(axis);
        charts.insert(index, b);
        charts.insert(index, a);
        Self::new(charts, self.dim, self.ambient_n)
    }

    fn probe_samples(&self, count: usize, seed: u64) -> Result<Vec<ChartSample>> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let chart = &self.charts[i % self.charts.len()];
            let mut rng = stream_rng(seed, domain::PROBE, i as u64);
            let u: Vec<f64> = chart
                .domain
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random_range(0.02..0.98))
                .collect();
            out.extend(chart.samples(&u)?);
        }
        Ok(out)
    }
}

macro_rules! atlas_accessors {
    ($ty:ident, $metric:expr) => {
        impl $ty {
            pub fn charts(&self) -> &[Chart] {
                &self.atlas.charts
            }

            pub fn dim(&self) -> usize {
                self.atlas.dim
            }

            pub fn ambient_n(&self) -> usize {
                self.atlas.ambient_n
            }

            pub fn volume(&self) -> Result<VolumeEstimate> {
                self.atlas.volume($metric)
            }

            /// Plain midpoint sum on the grid refined by `scale` (no extrapolation).
            pub fn midpoint_volume(&self, scale: usize) -> Result<f64> {
                self.atlas.integrate($metric, scale)
            }

            /// The image under a unitary map.
            pub fn transformed(&self, g: &GroupElement) -> Result<Self> {
                Ok(Self {
                    atlas: self.atlas.transformed(g)?,
                })
            }

            pub fn with_resolution_scale(&self, factor: usize) -> Self {
                Self {
                    atlas: self.atlas.with_resolution_scale(factor),
                }
            }

            /// Replaces chart `index` by its two halves along `axis`.
            pub fn split_chart(&self, index: usize, axis: usize) -> Self {
                Self {
                    atlas: self.atlas.split_chart(index, axis),
                }
            }

            /// Chart samples at pseudo-random interior parameters.
            pub fn probe_samples(&self, count: usize, seed: u64) -> Result<Vec<ChartSample>> {
                self.atlas.probe_samples(count, seed)
            }
        }
    };
}

/// A body in CP^n, given by charts into the unit sphere of C^{n+1}.
#[derive(Clone, Debug)]
pub struct ChartedSubmanifold {
    atlas: Atlas,
}

/// A body in S^{2n+1} ⊂ C^{n+1}, with the round metric.
#[derive(Clone, Debug)]
pub struct SphereSubmanifold {
    atlas: Atlas,
}

atlas_accessors!(ChartedSubmanifold, Metric::FubiniStudy);
atlas_accessors!(SphereSubmanifold, Metric::Sphere);

impl ChartedSubmanifold {
    pub fn new(charts: Vec<Chart>, dim: usize, ambient_n: usize) -> Self {
        Self {
            atlas: Atlas::new(charts, dim, ambient_n),
        }
    }

    /// The same charts read in the sphere.
    pub fn as_sphere_body(&self) -> SphereSubmanifold {
        SphereSubmanifold {
            atlas: self.atlas.clone(),
        }
    }
}

impl SphereSubmanifold {
    pub fn new(charts: Vec<Chart>, dim: usize, ambient_n: usize) -> Self {
        Self {
            atlas: Atlas::new(charts, dim, ambient_n),
        }
    }

    /// The same charts read through the Hopf map.
    pub fn projected(&self) -> ChartedSubmanifold {
        ChartedSubmanifold {
            atlas: self.atlas.clone(),
        }
    }
}

/// Hyperspherical coordinates: `k` angles to a point of S^k ⊂ R^{k+1}. All
/// angles but the last are polar; the last is the azimuth.
pub fn hyperspherical(angles: &[f64]) -> Vec<f64> {
    let k = angles.len();
    let mut x = Vec::with_capacity(k + 1);
    let mut sin_prod = 1.0;
    for &a in angles {
        x.push(sin_prod * a.cos());
        sin_prod *= a.sin();
    }
    x.push(sin_prod);
    x
}

fn sphere_domain(k: usize) -> (Vec<(f64, f64)>, Vec<usize>, Vec<bool>) {
    let mut domain = vec![(0.0, PI); k - 1];
    let mut res = vec![POLAR_RESOLUTION; k - 1];
    let mut periodic = vec![false; k - 1];
    domain.push((0.0, TAU));
    res.push(AZIMUTH_RESOLUTION);
    periodic.push(true);
    (domain, res, periodic)
}

fn real_embed(x: &[f64], len: usize) -> CVec {
    let mut v = vec![C64::new(0.0, 0.0); len];
    for (z, &xi) in v.iter_mut().zip(x) {
        z.re = xi;
    }
    CVec::from_vec_unchecked(v)
}

/// The real unit sphere S^k of R^{k+1} ⊂ C^{n+1}: the horizontal double
/// cover of the totally geodesic RP^k.
pub fn round_sphere(k: usize, n: usize) -> Result<SphereSubmanifold> {
    if k < 1 || k > n {
        return Err(Error::InvalidInput(format!("round sphere needs 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let (domain, res, periodic) = sphere_domain(k);
    let len = n + 1;
    let map: ParamFn = Arc::new(move |u: &[f64]| real_embed(&hyperspherical(u), len));
    Ok(SphereSubmanifold::new(
        vec![Chart::parametric(format!("S^{k}"), domain, res, periodic, 1.0, map)],
        k,
        n,
    ))
}

/// The totally geodesic RP^k = {[x_0:…:x_k:0:…:0], x real} ⊂ CP^n, charted by
/// the hemisphere {x_0 ≥ 0} of S^k (the antipodal boundary has measure zero).
pub fn geodesic_rp(k: usize, n: usize) -> Result<ChartedSubmanifold> {
    if k < 1 || k > n {
        return Err(Error::InvalidInput(format!("geodesic RP^k needs 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let (mut domain, res, mut periodic) = sphere_domain(k);
    // half of the first angle's range covers each line through the origin once
    domain[0].1 = if k == 1 { PI } else { FRAC_PI_2 };
    periodic[0] = false;
    let len = n + 1;
    let map: ParamFn = Arc::new(move |u: &[f64]| real_embed(&hyperspherical(u), len));
    Ok(ChartedSubmanifold::new(
        vec![Chart::parametric(format!("RP^{k}"), domain, res, periodic, 1.0, map)],
        k,
        n,
    ))
}

/// Complex Gram–Schmidt; fails on a rank-deficient list.
pub(crate) fn complex_orthonormalize(basis: &[CVec]) -> Result<Vec<CVec>> {
    let mut out: Vec<CVec> = Vec::with_capacity(basis.len());
    for (i, v) in basis.iter().enumerate() {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = e.hdot(&w);
                w.axpy(-c, e);
            }
        }
        let norm = w.norm();
        if norm <= 1e-10 * v.norm().max(1e-300) {
            return Err(Error::RankDeficient(format!("basis vector {i} lies in the span of the previous ones")));
        }
        out.push(w.scale_real(1.0 / norm));
    }
    Ok(out)
}

/// Polar angles in [0, π/2]^k to the positive orthant of S^k.
fn orthant_coords(angles: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(angles.len() + 1);
    let mut sin_prod = 1.0;
    for &a in angles {
        x.push(sin_prod * a.cos());
        sin_prod *= a.sin();
    }
    x.push(sin_prod);
    x
}

/// The linear CP^k spanned by `basis` (k+1 vectors of C^{n+1}), charted by
/// moduli on the positive orthant of S^k and k relative phases.
pub fn linear_cp(k: usize, n: usize, basis: &[CVec]) -> Result<ChartedSubmanifold> {
    if k < 1 || k > n {
        return Err(Error::InvalidInput(format!("linear CP^k needs 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    if basis.len() != k + 1 {
        return Err(Error::DimensionMismatch {
            expected: k + 1,
            got: basis.len(),
        });
    }
    if let Some(bad) = basis.iter().find(|b| b.len() != n + 1) {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: bad.len(),
        });
    }
    let frame = complex_orthonormalize(basis)?;
    let mut domain = vec![(0.0, FRAC_PI_2); k];
    let mut res = vec![POLAR_RESOLUTION; k];
    let mut periodic = vec![false; k];
    domain.extend(std::iter::repeat((0.0, TAU)).take(k));
    res.extend(std::iter::repeat(PHASE_RESOLUTION).take(k));
    periodic.extend(std::iter::repeat(true).take(k));
    let map: ParamFn = Arc::new(move |u: &[f64]| {
        let r = orthant_coords(&u[..k]);
        let mut z = frame[0].scale_real(r[0]);
        for j in 1..=k {
            z.axpy(C64::from_polar(r[j], u[k + j - 1]), &frame[j]);
        }
        z
    });
    Ok(ChartedSubmanifold::new(
        vec![Chart::parametric(format!("CP^{k}"), domain, res, periodic, 1.0, map)],
        2 * k,
        n,
    ))
}

/// The coordinate CP^k = span(e_0, …, e_k).
pub fn coordinate_cp(k: usize, n: usize) -> Result<ChartedSubmanifold> {
    let basis: Vec<CVec> = (0..=k).map(|j| CVec::basis(n + 1, j)).collect();
    linear_cp(k, n, &basis)
}

/// The Clifford torus `[e^{iθ_1} : … : e^{iθ_n} : 1] / √(n+1)` in CP^n.
pub fn clifford_torus(n: usize) -> Result<ChartedSubmanifold> {
    if n < 1 {
        return Err(Error::InvalidInput("Clifford torus needs n ≥ 1".into()));
    }
    let norm = 1.0 / ((n + 1) as f64).sqrt();
    let map: ParamFn = Arc::new(move |u: &[f64]| {
        let mut z: Vec<C64> = u.iter().map(|&th| C64::from_polar(norm, th)).collect();
        z.push(C64::new(norm, 0.0));
        CVec::from_vec_unchecked(z)
    });
    Ok(ChartedSubmanifold::new(
        vec![Chart::parametric(
            "Clifford",
            vec![(0.0, TAU); n],
            vec![AZIMUTH_RESOLUTION; n],
            vec![true; n],
            1.0,
            map,
        )],
        n,
        n,
    ))
}

/// The Hopf fibre `{e^{iφ} x}` through a unit vector.
pub fn hopf_fiber(x: &CVec) -> Result<SphereSubmanifold> {
    x.check_unit()?;
    let base = x.clone();
    let n = x.projective_dim();
    let map: ParamFn = Arc::new(move |u: &[f64]| base.scale(C64::from_polar(1.0, u[0])));
    Ok(SphereSubmanifold::new(
        vec![Chart::parametric("fibre", vec![(0.0, TAU)], vec![AZIMUTH_RESOLUTION], vec![true], 1.0, map)],
        1,
        n,
    ))
}

/// `ΣS = {(sin θ · x, cos θ) : θ ∈ [0, π], x ∈ S}` in the unit sphere of C^{n+2}.
pub fn suspend(body: &SphereSubmanifold) -> Result<SphereSubmanifold> {
    let charts = body
        .charts()
        .iter()
        .map(|c| {
            if !c.is_parametric() {
                return Err(Error::Unsupported("suspension of implicit charts".into()));
            }
            let inner = c.clone();
            let map: ParamFn = Arc::new(move |u: &[f64]| {
                let (s, co) = u[0].sin_cos();
                inner
                    .point(&u[1..])
                    .expect("parametric")
                    .scale_real(s)
                    .extended(C64::new(co, 0.0))
            });
            let mut domain = vec![(0.0, PI)];
            domain.extend_from_slice(&c.domain);
            let mut res = vec![SUSPENSION_RESOLUTION];
            res.extend_from_slice(&c.resolution);
            let mut periodic = vec![false];
            periodic.extend_from_slice(&c.periodic);
            Ok(Chart::parametric(format!("Σ{}", c.label), domain, res, periodic, c.multiplicity, map))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SphereSubmanifold::new(charts, body.dim() + 1, body.ambient_n() + 1))
}

/// Exponent of the partition-of-unity weights `|∂_j f|^p / Σ_k |∂_k f|^p`.
const POU_EXPONENT: i32 = 4;

/// One projection direction of a real hypersurface `{f = 0} ⊂ S^n`: the
/// locus is parametrized over the unit sphere of `e_j^⊥` by the real roots
/// `s` of `f(y + s e_j) = 0`, each root giving the point `(y + s e_j)/|y + s e_j|`.
struct ProjectionGraph {
    poly: HomogeneousPoly,
    direction: usize,
    used_directions: Vec<usize>,
    n: usize,
}

impl ProjectionGraph {
    fn embed(&self, sphere_point: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.n + 1);
        let mut it = sphere_point.iter();
        for k in 0..=self.n {
            y.push(if k == self.direction { 0.0 } else { *it.next().unwrap() });
        }
        y
    }

    fn samples(&self, u: &[f64]) -> Result<Vec<ChartSample>> {
        let j = self.direction;
        let y = self.embed(&hyperspherical(u));
        let mut v = u.to_vec();
        let dy: Vec<Vec<f64>> = (0..u.len())
            .map(|a| {
                v[a] = u[a] + FD_STEP;
                let plus = self.embed(&hyperspherical(&v));
                v[a] = u[a] - FD_STEP;
                let minus = self.embed(&hyperspherical(&v));
                v[a] = u[a];
                plus.iter().zip(&minus).map(|(p, m)| (p - m) * 0.5 / FD_STEP).collect()
            })
            .collect();

        let mut ej = vec![0.0; self.n + 1];
        ej[j] = 1.0;
        let along = self.poly.restrict_to_line(&ej, &y).dehomogenize();
        let scale = self.poly.coeff_scale();
        let degree = self.poly.degree() as i32;
        let mut out = Vec::new();
        for s in along.real_roots() {
            let mut xt = y.clone();
            xt[j] += s;
            let len = xt.iter().map(|c| c * c).sum::<f64>().sqrt();
            let grad = self.poly.gradient(&xt);
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / len.powi(degree - 1) / scale;
            let point: Vec<f64> = xt.iter().map(|c| c / len).collect();
            if grad_norm < 1e-8 {
                return Err(Error::SingularLocus { point, grad_norm });
            }
            let pow = |g: f64| (g / (grad_norm * scale * len.powi(degree - 1))).abs().powi(POU_EXPONENT);
            let total: f64 = self.used_directions.iter().map(|&k| pow(grad[k])).sum();
            if total < 1e-8 {
                return Err(Error::Unsupported(format!(
                    "locus normal at {point:?} is orthogonal to every usable projection direction"
                )));
            }
            let weight = pow(grad[j]) / total;
            if weight < 1e-14 {
                continue;
            }
            let tangents = dy
                .iter()
                .map(|d| {
                    let ds = -grad.iter().zip(d).map(|(g, di)| g * di).sum::<f64>() / grad[j];
                    let mut dxt = d.clone();
                    dxt[j] += ds;
                    let radial: f64 = point.iter().zip(&dxt).map(|(p, q)| p * q).sum();
                    let dx: Vec<f64> = dxt.iter().zip(&point).map(|(q, p)| (q - radial * p) / len).collect();
                    real_embed(&dx, self.n + 1)
                })
                .collect();
            out.push(ChartSample {
                point: real_embed(&point, self.n + 1),
                tangents,
                weight,
            });
        }
        Ok(out)
    }
}

/// Chart cover of the real locus of one homogeneous polynomial in RP^n.
///
/// For every coordinate direction `e_j` whose pure power `x_j^d` appears in
/// `f`, the locus is swept as a multi-sheeted graph over the unit sphere of
/// `e_j^⊥`; the sheets are blended by the partition of unity
/// `|∂_j f|^4 / Σ_k |∂_k f|^4`, which vanishes where a sheet folds. The sphere
/// double covers RP^n, hence multiplicity 1/2. `grid` is the midpoint count
/// on polar axes; azimuths use twice as many.
pub fn real_locus_charts(locus: &ImplicitRealLocus, grid: usize) -> Result<ChartedSubmanifold> {
    if locus.polys().len() != 1 {
        return Err(Error::Unsupported(format!(
            "real loci of {} equations (only hypersurfaces are charted)",
            locus.polys().len()
        )));
    }
    let n = locus.n();
    if n < 2 {
        return Err(Error::Unsupported("hypersurfaces of RP^1 are finite point sets".into()));
    }
    let poly = locus.polys()[0].clone();
    let scale = poly.coeff_scale();
    let used: Vec<usize> = (0..=n)
        .filter(|&j| poly.pure_power_coeff(j).abs() > 1e-12 * scale)
        .collect();
    if used.is_empty() {
        return Err(Error::Unsupported(
            "no coordinate direction is transverse to the locus (no pure powers in f)".into(),
        ));
    }
    let (domain, mut res, periodic) = sphere_domain(n - 1);
    for (r, &p) in res.iter_mut().zip(&periodic) {
        *r = if p { 2 * grid } else { grid };
    }
    let charts = used
        .iter()
        .map(|&j| {
            let graph = ProjectionGraph {
                poly: poly.clone(),
                direction: j,
                used_directions: used.clone(),
                n,
            };
            Chart {
                kind: ChartKind::Implicit(Arc::new(graph)),
                label: format!("graph[e_{j}]"),
                domain: domain.clone(),
                resolution: res.clone(),
                periodic: periodic.clone(),
                multiplicity: 0.5,
                transform: None,
            }
        })
        .collect();
    Ok(ChartedSubmanifold::new(charts, n - 1, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sphere_volume;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn argument_validation() {
        assert!(geodesic_rp(3, 2).is_err());
        assert!(geodesic_rp(0, 2).is_err());
        let dependent = vec![CVec::basis(3, 0), CVec::basis(3, 0).scale(C64::new(0.0, 2.0))];
        assert!(matches!(linear_cp(1, 2, &dependent), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn rp_volumes() {
        let v1 = geodesic_rp(1, 2).unwrap().volume().unwrap();
        assert!((v1.value - PI).abs() < 1e-6, "{v1:?}");
        let v2 = geodesic_rp(2, 2).unwrap().volume().unwrap();
        assert!((v2.value - 2.0 * PI).abs() < 1e-4, "{v2:?}");
        let v3 = geodesic_rp(3, 3).unwrap().volume().unwrap();
        assert!((v3.value - PI * PI).abs() < 1e-3, "{v3:?}");
    }

    #[test]
    fn sphere_volume_s3() {
        let v = round_sphere(3, 3).unwrap().volume().unwrap();
        assert!((v.value - 2.0 * PI * PI).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn cp_volumes() {
        let v1 = coordinate_cp(1, 2).unwrap().volume().unwrap();
        assert!((v1.value - PI).abs() < 1e-4, "{v1:?}");
        let v2 = coordinate_cp(2, 2).unwrap().volume().unwrap();
        assert!((v2.value - PI * PI / 2.0).abs() < 1e-3, "{v2:?}");
        let rp2 = geodesic_rp(2, 2).unwrap().volume().unwrap();
        assert!(v1.value < rp2.value);
    }

    #[test]
    fn clifford_circle_length() {
        let t = clifford_torus(1).unwrap();
        assert_eq!(t.dim(), 1);
        assert!((t.volume().unwrap().value - PI).abs() < 1e-6);
    }

    #[test]
    fn refinement_stays_within_error_estimate() {
        for body in [geodesic_rp(2, 2).unwrap(), geodesic_rp(3, 3).unwrap(), coordinate_cp(1, 2).unwrap()] {
            let a = body.volume().unwrap();
            let b = body.with_resolution_scale(2).volume().unwrap();
            assert!((a.value - b.value).abs() < a.error, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn suspension_examples() {
        let circle = round_sphere(1, 1).unwrap();
        let s2 = suspend(&circle).unwrap().volume().unwrap();
        assert!(rel(s2.value, 4.0 * PI) < 1e-3, "{s2:?}");
        let s3 = round_sphere(3, 3).unwrap();
        let s4 = suspend(&s3).unwrap().volume().unwrap();
        assert!(rel(s4.value, 8.0 * PI * PI / 3.0) < 1e-3, "{s4:?}");
        assert!(rel(s4.value, sphere_volume(4)) < 1e-3);
    }

    #[test]
    fn suspension_keeps_horizontality() {
        let circle = round_sphere(1, 2).unwrap();
        let sigma = suspend(&circle).unwrap();
        for sample in sigma.probe_samples(200, 3).unwrap() {
            for t in &sample.tangents {
                let a = crate::projective::alpha_raw(&sample.point, t) / t.norm();
                assert!(a.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn linear_hyperplane_locus() {
        let f = HomogeneousPoly::coordinate(4, 3);
        let locus = ImplicitRealLocus::hypersurface(f).unwrap();
        let body = real_locus_charts(&locus, 24).unwrap();
        let v = body.volume().unwrap();
        assert!(rel(v.value, 2.0 * PI) < 1e-2, "{v:?}");
    }

    #[test]
    fn singular_locus_is_rejected() {
        // x_0^2 x_1 + x_1^3 − x_2^3 ... a cone x_0^3 = 0 is singular everywhere on its locus
        let f = HomogeneousPoly::from_terms(&[(1.0, &[3, 0, 0])]).unwrap();
        let locus = ImplicitRealLocus::hypersurface(f).unwrap();
        let err = real_locus_charts(&locus, 8).unwrap().volume();
        assert!(matches!(err, Err(Error::SingularLocus { .. })), "{err:?}");
    }

    #[test]
    fn codimension_two_unsupported() {
        let locus = ImplicitRealLocus::new(
            3,
            vec![HomogeneousPoly::coordinate(4, 3), HomogeneousPoly::coordinate(4, 2)],
        )
        .unwrap();
        assert!(matches!(real_locus_charts(&locus, 8), Err(Error::Unsupported(_))));
    }
}
