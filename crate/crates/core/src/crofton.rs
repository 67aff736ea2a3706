//! Monte Carlo evaluation of the kinematic formula: Haar-averaged exact
//! intersection counts, Crofton volumes, and the stabilizer average σ.
//!
//! The Haar measure has total mass 1. With that normalization the RP^{2m}
//! baseline (whose count is 1 for almost every g) calibrates the kinematic
//! constant, and the Crofton volume of a countable body `P` is
//! `E[#(P ∩ gQ)] · vol(RP^{2m})`.

use std::collections::BTreeMap;
use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::haar::{domain, project_su, sample_stabilizer, sample_unitary, stream_rng};
use crate::intersect::{count_hypersurface_cap, count_rp_cap_line, CountResult};
use crate::numeric::{compensated_sum, mean_and_std, small_det, sphere_volume};
use crate::polynomial::ImplicitRealLocus;
use crate::projective::{CVec, C64, I};

/// Fraction of degenerate samples above which an estimate carries a warning.
pub const DEGENERATE_WARNING: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyKind {
    Sphere,
    Rp,
    Cp,
}

/// Volumes of S^k, RP^k and CP^k (Fubini–Study normalized so vol(CP^1) = π).
pub fn closed_form_volumes(kind: BodyKind, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidInput("closed-form volumes need k ≥ 1".into()));
    }
    Ok(match kind {
        BodyKind::Sphere => sphere_volume(k),
        BodyKind::Rp => sphere_volume(k) / 2.0,
        BodyKind::Cp => {
            let fact: f64 = (1..=k).map(|j| j as f64).product();
            std::f64::consts::PI.powi(k as i32) / fact
        }
    })
}

/// A body whose intersections with `g CP^{n−m}` are counted exactly.
#[derive(Clone, Debug)]
pub enum CountableBody {
    /// The totally geodesic RP^{2m}.
    Rp2m,
    /// The real locus of one hypersurface in RP^{2m+1}.
    Hypersurface(ImplicitRealLocus),
}

impl CountableBody {
    pub fn label(&self) -> String {
        match self {
            CountableBody::Rp2m => "rp2m".into(),
            CountableBody::Hypersurface(l) => format!("hypersurface(deg={:?})", l.degrees()),
        }
    }

    fn check(&self, m: usize, n: usize) -> Result<()> {
        if m < 1 || 2 * m > n {
            return Err(Error::InvalidInput(format!("need 1 ≤ m and 2m ≤ n, got m={m}, n={n}")));
        }
        if let CountableBody::Hypersurface(l) = self {
            if l.n() != n || l.half_dim() != Some(m) || l.polys().len() != 1 {
                return Err(Error::InvalidInput(format!(
                    "hypersurface in RP^{} has dimension {}, expected a 2m = {} dimensional locus in RP^{n}",
                    l.n(),
                    l.dim(),
                    2 * m
                )));
            }
        }
        Ok(())
    }

    fn count(&self, m: usize, n: usize, g: &crate::haar::GroupElement) -> Result<CountResult> {
        match self {
            CountableBody::Rp2m => count_rp_cap_line(m, n, g),
            CountableBody::Hypersurface(l) => count_hypersurface_cap(l, g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CroftonEstimate {
    pub m: usize,
    pub n: usize,
    pub body: String,
    pub seed: u64,
    pub n_samples: usize,
    /// Mean count over transversal samples.
    pub mean_count: f64,
    pub stderr: f64,
    pub degenerate_fraction: f64,
    /// Count → number of transversal samples.
    pub histogram: BTreeMap<usize, u64>,
    pub warning: Option<String>,
}

impl CroftonEstimate {
    pub fn transversal_samples(&self) -> u64 {
        self.histogram.values().sum()
    }

    pub fn min_count(&self) -> Option<usize> {
        self.histogram.keys().next().copied()
    }

    pub fn max_count(&self) -> Option<usize> {
        self.histogram.keys().next_back().copied()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct McOptions {
    /// Rescale each sample into SU(n+1). Counts are invariant under the
    /// central phase, so this only exists to demonstrate that.
    pub special_unitary: bool,
}

/// Haar average of `#(P ∩ g CP^{n−m})` over `n_samples` group elements.
pub fn mc_expected_count(body: &CountableBody, m: usize, n: usize, n_samples: usize, seed: u64) -> Result<CroftonEstimate> {
    mc_expected_count_with(body, m, n, n_samples, seed, McOptions::default())
}

pub fn mc_expected_count_with(
    body: &CountableBody,
    m: usize,
    n: usize,
    n_samples: usize,
    seed: u64,
    options: McOptions,
) -> Result<CroftonEstimate> {
    body.check(m, n)?;
    if n_samples < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 samples, got {n_samples}")));
    }
    let results = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = sample_unitary(n + 1, seed, i)?;
            if options.special_unitary {
                g = project_su(&g);
            }
            body.count(m, n, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(body.label(), m, n, seed, &results))
}

fn aggregate(body: String, m: usize, n: usize, seed: u64, results: &[CountResult]) -> CroftonEstimate {
    let mut histogram = BTreeMap::new();
    let mut sum = 0u64;
    let mut sum_sq = 0u64;
    for r in results.iter().filter(|r| r.transversal) {
        *histogram.entry(r.count).or_insert(0u64) += 1;
        sum += r.count as u64;
        sum_sq += (r.count * r.count) as u64;
    }
    let good: u64 = histogram.values().sum();
    let total = results.len();
    // integer moments make the aggregate exact and order independent
    let (mean_count, stderr) = if good == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = sum as f64 / good as f64;
        let var = if good > 1 {
            ((sum_sq as f64 - good as f64 * mean * mean) / (good - 1) as f64).max(0.0)
        } else {
            0.0
        };
        (mean, (var / good as f64).sqrt())
    };
    let degenerate_fraction = (total as u64 - good) as f64 / total as f64;
    let warning = (degenerate_fraction > DEGENERATE_WARNING).then(|| {
        format!("{:.2}% of samples were degenerate; thresholds may be misconfigured", 100.0 * degenerate_fraction)
    });
    CroftonEstimate {
        m,
        n,
        body,
        seed,
        n_samples: total,
        mean_count,
        stderr,
        degenerate_fraction,
        histogram,
        warning,
    }
}

/// A volume with a ±3 standard-error band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CroftonVolume {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl fmt::Display for CroftonVolume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} [{:.6}, {:.6}]", self.value, self.low, self.high)
    }
}

/// `mean_count · vol(RP^{2m})`.
pub fn crofton_volume(est: &CroftonEstimate, m: usize, n: usize) -> Result<CroftonVolume> {
    if est.m != m || est.n != n {
        return Err(Error::ParameterMismatch {
            m_est: est.m,
            n_est: est.n,
            m,
            n,
        });
    }
    let unit = closed_form_volumes(BodyKind::Rp, 2 * m)?;
    let value = est.mean_count * unit;
    let band = 3.0 * est.stderr * unit;
    Ok(CroftonVolume {
        value,
        low: value - band,
        high: value + band,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizationReport {
    pub holds: bool,
    /// `mean_count − 1`.
    pub margin: f64,
    /// Margin in units of the standard error (0 for a zero-variance estimate).
    pub margin_sigmas: f64,
    /// Smallest transversal count observed.
    pub min_count: Option<usize>,
    pub volume: CroftonVolume,
    pub reference_volume: f64,
}

/// Checks `mean_count ≥ 1 − 3·stderr`, i.e. the Crofton volume is at least
/// vol(RP^{2m}) up to Monte Carlo error.
pub fn verify_minimization_inequality(est: &CroftonEstimate) -> Result<MinimizationReport> {
    let volume = crofton_volume(est, est.m, est.n)?;
    let margin = est.mean_count - 1.0;
    Ok(MinimizationReport {
        holds: est.mean_count >= 1.0 - 3.0 * est.stderr,
        margin,
        margin_sigmas: if est.stderr > 0.0 { margin / est.stderr } else { 0.0 },
        min_count: est.min_count(),
        volume,
        reference_volume: closed_form_volumes(BodyKind::Rp, 2 * est.m)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub n_planes: usize,
    pub mean_wedge: f64,
    pub stderr: f64,
    /// Sample standard deviation of the per-plane means.
    pub plane_choice_spread: f64,
    pub plane_means: Vec<f64>,
    /// `σ̄ · vol(RP^{2m}) · vol(CP^{n−m})`.
    pub kappa: f64,
}

/// A Hermitian-orthonormal (hence ω-isotropic, real-orthonormal) 2m-frame in
/// the horizontal space at `e_0`, i.e. in coordinates 1..=n.
pub fn isotropic_frame(m: usize, n: usize, seed: u64, plane: u64) -> Vec<CVec> {
    let mut rng = stream_rng(seed, domain::ISOTROPIC_FRAME, plane);
    let mut frame: Vec<CVec> = Vec::with_capacity(2 * m);
    while frame.len() < 2 * m {
        let mut v = CVec::zeros(n + 1);
        for z in v.as_mut_slice()[1..].iter_mut() {
            *z = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        }
        for _ in 0..2 {
            for u in &frame {
                // removes the components along u and i u
                let c = u.hdot(&v);
                v.axpy(-c, u);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            frame.push(v.scale_real(1.0 / norm));
        }
    }
    frame
}

/// Largest deviation of a real frame from orthonormality, and of its
/// pairwise ω-values from zero.
fn frame_defect(frame: &[CVec]) -> f64 {
    let mut worst = 0.0f64;
    for (a, u) in frame.iter().enumerate() {
        for (b, v) in frame.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((u.real_dot(v) - target).abs());
            worst = worst.max(crate::projective::omega_raw(u, v).abs());
        }
    }
    worst
}

/// `|u_1 ∧ … ∧ u_{2m} ∧ v_1 ∧ i v_1 ∧ …|` in T_{[e_0]} CP^n ≅ C^n = R^{2n}.
fn wedge_norm(vectors: &[CVec], n: usize) -> f64 {
    let dim = 2 * n;
    let mut rows = Vec::with_capacity(dim * dim);
    for v in vectors {
        let s = &v.as_slice()[1..];
        rows.extend(s.iter().map(|z| z.re));
        rows.extend(s.iter().map(|z| z.im));
    }
    small_det(rows, dim).abs()
}

/// Average of `σ(T_pP, k T_qQ)` over the stabilizer K of `[e_0]`, for
/// `n_planes` independent isotropic tangent planes `T_pP`.
pub fn estimate_sigma(m: usize, n: usize, n_samples: usize, n_planes: usize, seed: u64) -> Result<SigmaEstimate> {
    if m < 1 || 2 * m > n {
        return Err(Error::InvalidInput(format!("σ needs 1 ≤ m ≤ n − m, got m={m}, n={n}")));
    }
    if n_samples < 2 || n_planes < 2 {
        return Err(Error::InvalidInput("σ needs at least 2 samples and 2 planes".into()));
    }
    let frames: Vec<Vec<CVec>> = (0..n_planes as u64).map(|p| isotropic_frame(m, n, seed, p)).collect();
    for f in &frames {
        let defect = frame_defect(f);
        if defect > 1e-10 {
            return Err(Error::RankDeficient(format!("isotropic frame defect {defect:e}")));
        }
    }
    let total = n_samples * n_planes;
    let wedges = (0..total)
        .into_par_iter()
        .map(|flat| {
            let plane = flat / n_samples;
            let k = sample_stabilizer(n, seed, flat as u64)?;
            let mut vectors = frames[plane].clone();
            for j in 1..=n - m {
                let v = k.apply(&CVec::basis(n + 1, j));
                let iv = v.scale(I);
                vectors.push(v);
                vectors.push(iv);
            }
            Ok(wedge_norm(&vectors, n))
        })
        .collect::<Result<Vec<f64>>>()?;
    let plane_means: Vec<f64> = wedges
        .chunks(n_samples)
        .map(|c| compensated_sum(c.iter().copied()) / n_samples as f64)
        .collect();
    let (mean_wedge, std) = mean_and_std(&wedges);
    let (_, spread) = mean_and_std(&plane_means);
    let kappa = mean_wedge * closed_form_volumes(BodyKind::Rp, 2 * m)? * closed_form_volumes(BodyKind::Cp, n - m)?;
    Ok(SigmaEstimate {
        m,
        n,
        seed,
        n_samples,
        n_planes,
        mean_wedge,
        stderr: std / (total as f64).sqrt(),
        plane_choice_spread: spread,
        plane_means,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::HomogeneousPoly;
    use crate::submanifolds::{coordinate_cp, geodesic_rp, round_sphere};
    use std::f64::consts::PI;

    #[test]
    fn closed_forms_against_quadrature() {
        let rp2 = closed_form_volumes(BodyKind::Rp, 2).unwrap();
        assert!((rp2 - 2.0 * PI).abs() < 1e-14);
        assert!((geodesic_rp(2, 2).unwrap().volume().unwrap().value - rp2).abs() < 1e-4);
        let cp1 = closed_form_volumes(BodyKind::Cp, 1).unwrap();
        assert!((coordinate_cp(1, 1).unwrap().volume().unwrap().value - cp1).abs() < 1e-4);
        let s3 = closed_form_volumes(BodyKind::Sphere, 3).unwrap();
        assert!((round_sphere(3, 3).unwrap().volume().unwrap().value - s3).abs() < 1e-3);
        assert!(closed_form_volumes(BodyKind::Cp, 0).is_err());
    }

    #[test]
    fn baseline_is_point_mass_at_one() {
        let est = mc_expected_count(&CountableBody::Rp2m, 1, 2, 2000, 1).unwrap();
        assert_eq!(est.mean_count, 1.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.histogram.len(), 1);
        let v = crofton_volume(&est, 1, 2).unwrap();
        assert!((v.value - 2.0 * PI).abs() < 1e-12);
        let report = verify_minimization_inequality(&est).unwrap();
        assert!(report.holds);
        assert_eq!(report.margin, 0.0);
    }

    #[test]
    fn linear_hypersurface_matches_baseline() {
        let lin = ImplicitRealLocus::hypersurface(HomogeneousPoly::coordinate(4, 1)).unwrap();
        let est = mc_expected_count(&CountableBody::Hypersurface(lin), 1, 3, 1000, 2).unwrap();
        assert_eq!(est.mean_count, 1.0);
    }

    #[test]
    fn volume_scales_linearly() {
        let mut est = mc_expected_count(&CountableBody::Rp2m, 1, 2, 100, 1).unwrap();
        est.mean_count = 1.5;
        est.stderr = 0.01;
        let v = crofton_volume(&est, 1, 2).unwrap();
        assert!((v.value - 3.0 * PI).abs() < 1e-12);
        assert!((v.high - v.value - 0.06 * PI).abs() < 1e-12);
        assert!(matches!(crofton_volume(&est, 1, 3), Err(Error::ParameterMismatch { .. })));
    }

    #[test]
    fn argument_checks() {
        assert!(mc_expected_count(&CountableBody::Rp2m, 1, 2, 50, 0).is_err());
        assert!(mc_expected_count(&CountableBody::Rp2m, 2, 3, 500, 0).is_err());
        assert!(estimate_sigma(2, 2, 10, 2, 0).is_err());
        assert!(estimate_sigma(0, 2, 10, 2, 0).is_err());
    }

    #[test]
    fn su_projection_leaves_counts_unchanged() {
        let cubic = ImplicitRealLocus::hypersurface(HomogeneousPoly::fermat(4, 3)).unwrap();
        let body = CountableBody::Hypersurface(cubic);
        let a = mc_expected_count(&body, 1, 3, 500, 9).unwrap();
        let b = mc_expected_count_with(&body, 1, 3, 500, 9, McOptions { special_unitary: true }).unwrap();
        assert_eq!(a.histogram, b.histogram);
    }

    #[test]
    fn isotropic_frames_are_isotropic() {
        for p in 0..10 {
            let f = isotropic_frame(2, 4, 3, p);
            assert!(frame_defect(&f) < 1e-12);
            assert!(f.iter().all(|v| v[0] == C64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn wedge_is_bounded() {
        let s = estimate_sigma(1, 2, 500, 4, 5).unwrap();
        assert!(s.mean_wedge > 0.0 && s.mean_wedge <= 1.0);
        assert_eq!(s.plane_means.len(), 4);
    }
}
