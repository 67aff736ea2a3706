//! The acceptance suite: seven criteria, each returning a pass/fail verdict
//! with the measured numbers. Shared by the `acceptance` test target and the
//! `selftest` command.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::crofton::{
    closed_form_volumes, crofton_volume, estimate_sigma, mc_expected_count, BodyKind, CountableBody,
};
use crate::error::{Error, Result};
use crate::hamflow::{
    builtin_nonlinear_specs, check_minimization, horizontality_monitor, integrate_flow, observed_order,
    volume_along_flow, FlowConfig, Hamiltonian, HamiltonianSpec,
};
use crate::numeric::{sphere_volume, wallis_integral};
use crate::polynomial::{HomogeneousPoly, ImplicitRealLocus};
use crate::projective::{fs_distance, ProjPoint};
use crate::report;
use crate::submanifolds::{coordinate_cp, geodesic_rp, real_locus_charts, round_sphere, suspend};

#[derive(Clone, Debug, Serialize)]
pub struct SelftestConfig {
    pub seed: u64,
    pub crofton_samples: usize,
    pub bezout_samples: usize,
    pub sigma_samples: usize,
    pub sigma_planes: usize,
    pub locus_grid: usize,
    pub flow_dt: f64,
    pub flow_mesh_scale: usize,
    pub flow_checkpoints: usize,
    /// Thread counts compared by the determinism criterion.
    pub thread_counts: Vec<usize>,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            crofton_samples: 10_000,
            bezout_samples: 100_000,
            sigma_samples: 10_000,
            sigma_planes: 20,
            locus_grid: 48,
            flow_dt: 1e-3,
            flow_mesh_scale: 64,
            flow_checkpoints: 10,
            thread_counts: vec![1, 3, 8],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub budget_secs: Option<f64>,
    pub details: Vec<String>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {}: {} ({:.2} s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs
        )?;
        if let Some(b) = self.budget_secs {
            write!(f, ", budget {b:.0} s")?;
        }
        write!(f, ") | {}", self.details.join("; "))
    }
}

/// Collects checks for one criterion.
struct Checks {
    ok: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            ok: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, detail: String) {
        if !pass {
            self.ok = false;
            self.details.push(format!("FAILED {detail}"));
        } else {
            self.details.push(detail);
        }
    }

    fn finish(mut self, id: u8, title: &'static str, start: Instant, budget: Option<f64>) -> CriterionResult {
        let elapsed = start.elapsed().as_secs_f64();
        if let Some(b) = budget {
            if elapsed >= b {
                self.ok = false;
                self.details.push(format!("FAILED runtime {elapsed:.1} s ≥ {b} s"));
            }
        }
        CriterionResult {
            id,
            title,
            passed: self.ok,
            elapsed_secs: elapsed,
            budget_secs: budget,
            details: self.details,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// 1: quadrature volumes of RP^1, RP^2, RP^3, CP^1, CP^2 and vol(CP^1) < vol(RP^2).
pub fn criterion_1() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let cases = [
        ("RP^1", geodesic_rp(1, 1)?, closed_form_volumes(BodyKind::Rp, 1)?),
        ("RP^2", geodesic_rp(2, 2)?, closed_form_volumes(BodyKind::Rp, 2)?),
        ("RP^3", geodesic_rp(3, 3)?, closed_form_volumes(BodyKind::Rp, 3)?),
        ("CP^1", coordinate_cp(1, 1)?, closed_form_volumes(BodyKind::Cp, 1)?),
        ("CP^2", coordinate_cp(2, 2)?, closed_form_volumes(BodyKind::Cp, 2)?),
    ];
    let mut values = Vec::new();
    for (name, body, exact) in &cases {
        let v = body.volume()?;
        let e = rel(v.value, *exact);
        c.check(e < 1e-3, format!("{name} = {:.8} (exact {exact:.8}, rel err {e:.1e})", v.value));
        values.push(v.value);
    }
    c.check(
        values[3] < values[1],
        format!("vol(CP^1) = {:.6} < vol(RP^2) = {:.6}", values[3], values[1]),
    );
    Ok(c.finish(1, "closed-form volumes by quadrature", start, Some(10.0)))
}

pub const BASELINE_CASES: [(usize, usize); 3] = [(1, 2), (1, 3), (2, 4)];

/// CSV of the RP^{2m} baseline runs, and their estimates.
pub fn baseline_csv(cfg: &SelftestConfig) -> Result<(String, Vec<crate::crofton::CroftonEstimate>)> {
    let estimates = BASELINE_CASES
        .iter()
        .map(|&(m, n)| mc_expected_count(&CountableBody::Rp2m, m, n, cfg.crofton_samples, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let head = report::header(
        "crofton",
        &[("body", "rp".into()), ("samples", cfg.crofton_samples.to_string()), ("seed", cfg.seed.to_string())],
    );
    Ok((report::crofton_csv(head, &estimates)?, estimates))
}

/// 2: the RP^{2m} count is 1 for every transversal sample.
pub fn criterion_2(cfg: &SelftestConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let (_, estimates) = baseline_csv(cfg)?;
    for e in &estimates {
        let only_one = e.histogram.keys().all(|&k| k == 1) && !e.histogram.is_empty();
        c.check(
            only_one,
            format!("(m,n)=({},{}) histogram {:?}", e.m, e.n, e.histogram),
        );
        c.check(
            e.degenerate_fraction < 1e-3,
            format!("degenerate fraction {:.1e}", e.degenerate_fraction),
        );
        let v = crofton_volume(e, e.m, e.n)?;
        let exact = closed_form_volumes(BodyKind::Rp, 2 * e.m)?;
        c.check(
            rel(v.value, exact) < 1e-6,
            format!("volume {:.10} vs vol(RP^{}) {:.10}", v.value, 2 * e.m, exact),
        );
    }
    Ok(c.finish(2, "Crofton baseline for RP^(2m)", start, Some(60.0)))
}

pub fn fermat_cubic() -> ImplicitRealLocus {
    ImplicitRealLocus::hypersurface(HomogeneousPoly::fermat(4, 3)).expect("valid cubic")
}

pub fn bezout_csv(cfg: &SelftestConfig) -> Result<(String, crate::crofton::CroftonEstimate)> {
    let est = mc_expected_count(&CountableBody::Hypersurface(fermat_cubic()), 1, 3, cfg.bezout_samples, cfg.seed)?;
    let head = report::header(
        "bezout",
        &[("body", "fermat3".into()), ("samples", cfg.bezout_samples.to_string()), ("seed", cfg.seed.to_string())],
    );
    let mut text = report::crofton_csv(head.clone(), std::slice::from_ref(&est))?;
    text.push_str(&report::histogram_csv(String::new(), &est, 3));
    Ok((text, est))
}

/// 3: Fermat cubic counts in {1, 3}, Bezout and minimality bounds, and
/// agreement with quadrature of the real locus.
pub fn criterion_3(cfg: &SelftestConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let (_, est) = bezout_csv(cfg)?;
    let support: BTreeSet<usize> = est.histogram.keys().copied().collect();
    c.check(
        support.iter().all(|k| *k == 1 || *k == 3),
        format!("histogram {:?}, degenerate {:.1e}", est.histogram, est.degenerate_fraction),
    );
    let v = crofton_volume(&est, 1, 3)?;
    let unit = closed_form_volumes(BodyKind::Rp, 2)?;
    let upper = 3.0 * unit * (1.0 + 3.0 * est.stderr / est.mean_count);
    c.check(v.value <= upper, format!("Crofton volume {:.6} ≤ 3 vol(RP^2)(1 + 3 se/mean) = {upper:.6}", v.value));
    c.check(v.value >= unit, format!("Crofton volume {:.6} ≥ vol(RP^2) = {unit:.6}", v.value));
    let quad = real_locus_charts(&fermat_cubic(), cfg.locus_grid)?.volume()?;
    let e = rel(v.value, quad.value);
    c.check(
        e < 0.02,
        format!("quadrature {:.6} ± {:.1e}, relative difference {e:.2e}", quad.value, quad.error),
    );
    Ok(c.finish(3, "Bezout cap and parity on the Fermat cubic", start, Some(300.0)))
}

pub const SIGMA_CASES: [(usize, usize); 2] = [(1, 2), (1, 3)];

pub fn sigma_csv(cfg: &SelftestConfig) -> Result<(String, Vec<crate::crofton::SigmaEstimate>)> {
    let estimates = SIGMA_CASES
        .iter()
        .map(|&(m, n)| estimate_sigma(m, n, cfg.sigma_samples, cfg.sigma_planes, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let head = report::header(
        "sigma",
        &[
            ("samples", cfg.sigma_samples.to_string()),
            ("planes", cfg.sigma_planes.to_string()),
            ("seed", cfg.seed.to_string()),
        ],
    );
    Ok((report::sigma_csv(head, &estimates), estimates))
}

/// 4: σ does not depend on the isotropic plane.
pub fn criterion_4(cfg: &SelftestConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let (_, estimates) = sigma_csv(cfg)?;
    for s in &estimates {
        let r = s.plane_choice_spread / s.mean_wedge;
        c.check(
            r < 0.01,
            format!(
                "(m,n)=({},{}) mean wedge {:.5}, spread/mean {:.2}%, kappa {:.4}",
                s.m,
                s.n,
                s.mean_wedge,
                100.0 * r,
                s.kappa
            ),
        );
    }
    Ok(c.finish(4, "sigma constancy across isotropic planes", start, None))
}

/// 5: suspension volumes and the Wallis factors.
pub fn criterion_5() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    for (k, exact) in [(1usize, 4.0 * PI), (3, 8.0 * PI * PI / 3.0)] {
        let base = round_sphere(k, k)?;
        let sus = suspend(&base)?.volume()?;
        let bv = base.volume()?;
        let e = rel(sus.value, exact);
        c.check(
            e < 1e-3 && rel(exact, sphere_volume(k + 1)) < 1e-12,
            format!("vol(ΣS^{k}) = {:.8} vs {exact:.8} (rel err {e:.1e})", sus.value),
        );
        let wallis = wallis_integral(k);
        let expected = if k == 1 { 2.0 } else { 4.0 / 3.0 };
        let ratio = sus.value / bv.value;
        c.check(
            (wallis - expected).abs() < 1e-14 && rel(ratio, wallis) < 1e-3,
            format!("∫ sin^{k} = {wallis:.6}, quadrature ratio {ratio:.6}"),
        );
    }
    Ok(c.finish(5, "suspension and Wallis identity", start, None))
}

fn flow_config(cfg: &SelftestConfig) -> FlowConfig {
    FlowConfig {
        t_max: 1.0,
        dt: cfg.flow_dt,
        checkpoints: cfg.flow_checkpoints,
        mesh_scale: cfg.flow_mesh_scale,
    }
}

/// Hermitian form used by the isometric-flow check.
pub fn sample_hermitian_spec() -> HamiltonianSpec {
    HamiltonianSpec::hermitian(
        vec![vec![0.4, 0.2, -0.1], vec![0.2, -0.3, 0.25], vec![-0.1, 0.25, 0.1]],
        Some(vec![vec![0.0, 0.3, 0.1], vec![-0.3, 0.0, -0.2], vec![-0.1, 0.2, 0.0]]),
    )
}

/// 6: flows of the horizontal circle over RP^1 in S^5.
pub fn criterion_6(cfg: &SelftestConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let body = round_sphere(1, 2)?;
    let fc = flow_config(cfg);

    // (a) constant Hamiltonian
    let h = Hamiltonian::new(&HamiltonianSpec::constant(1.0), 2)?;
    let states = integrate_flow(&body, &h, &fc)?;
    let mut worst: f64 = 0.0;
    for s in &states {
        for (p0, p) in states[0].mesh.points().iter().zip(s.mesh.points()) {
            worst = worst.max(fs_distance(&ProjPoint::new(p0.clone())?, &ProjPoint::new(p.clone())?)?);
        }
    }
    c.check(worst < 1e-8, format!("(a) max projected displacement {worst:.1e}"));

    // (b) Hermitian quadratic
    let h = Hamiltonian::new(&sample_hermitian_spec(), 2)?;
    let states = integrate_flow(&body, &h, &fc)?;
    let dev = volume_along_flow(&states)?
        .iter()
        .map(|v| rel(v.projected_volume, PI))
        .fold(0.0, f64::max);
    c.check(dev < 1e-3, format!("(b) max |vol/π − 1| = {dev:.1e}"));

    // (c) nonlinear specs
    for (name, spec) in builtin_nonlinear_specs() {
        let h = Hamiltonian::new(&spec, 2)?;
        let states = integrate_flow(&body, &h, &fc)?;
        let reports: Vec<_> = states.iter().map(horizontality_monitor).collect();
        let initial = reports[0].defect;
        // the initial real circle has defect exactly 0; the difference-stencil
        // truncation level at time t is the floor below which α cannot be resolved
        let ok = reports.iter().all(|r| r.defect <= 3.0 * initial.max(r.truncation));
        let peak = reports.iter().map(|r| r.defect).fold(0.0, f64::max);
        let peak_floor = reports.iter().map(|r| r.truncation).fold(0.0, f64::max);
        c.check(
            ok,
            format!("(c) {name}: horizontality ≤ 3·max(initial {initial:.1e}, truncation), peak {peak:.1e} (truncation up to {peak_floor:.1e})"),
        );
        let check = check_minimization(&states, 1, 128)?;
        let iso = check.suspension.iter().map(|s| s.isotropy).fold(0.0, f64::max);
        c.check(
            iso < 1e-6,
            format!("(c) {name}: projected curve isotropic (dim 1); suspended isotropy {iso:.1e}"),
        );
        c.check(
            check.holds,
            format!(
                "(c) {name}: min projected volume {:.6} ≥ π(1 − 1e−3) = {:.6}",
                check.min_projected_volume,
                PI * (1.0 - 1e-3)
            ),
        );
        let sus_err = check.suspension.iter().map(|s| s.relative_error).fold(0.0, f64::max);
        c.check(sus_err < 1e-3, format!("(c) {name}: suspension identity rel err {sus_err:.1e}"));
        let half_dev = states
            .iter()
            .zip(volume_along_flow(&states)?)
            .map(|(s, v)| Ok(rel(s.mesh.projected_half_length()?, v.projected_volume)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        c.check(half_dev < 5e-3, format!("(c) {name}: double-cover polygon deviation {half_dev:.1e}"));
    }

    // (d) integrator order
    let (_, quartic) = &builtin_nonlinear_specs()[0];
    let h = Hamiltonian::new(quartic, 2)?;
    let order = observed_order(&body, &h, 1.0, 0.04, 4)?;
    c.check(order >= 3.5, format!("(d) observed order {order:.2} (dt 0.04, 0.02, 0.01)"));
    Ok(c.finish(6, "Hamiltonian flow suite", start, Some(120.0)))
}

/// CSV bundle for the determinism comparison.
pub fn deterministic_outputs(cfg: &SelftestConfig) -> Result<String> {
    let (a, _) = baseline_csv(cfg)?;
    let (b, _) = bezout_csv(cfg)?;
    let (s, _) = sigma_csv(cfg)?;
    Ok(a + &b + &s)
}

/// 7: criteria 2–4 produce byte-identical CSV across thread counts.
pub fn criterion_7(cfg: &SelftestConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut outputs = Vec::new();
    for &threads in &cfg.thread_counts {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Configuration(e.to_string()))?;
        outputs.push((threads, pool.install(|| deterministic_outputs(cfg))?));
    }
    let (t0, first) = &outputs[0];
    for (t, out) in &outputs[1..] {
        c.check(
            out == first,
            format!("{} bytes at {t0} thread(s) vs {} bytes at {t} thread(s)", first.len(), out.len()),
        );
    }
    Ok(c.finish(7, "byte-identical CSV across thread counts", start, None))
}

/// Runs every criterion in order. An error inside a criterion counts as a failure.
pub fn run_all(cfg: &SelftestConfig) -> Vec<CriterionResult> {
    type Runner<'a> = Box<dyn Fn() -> Result<CriterionResult> + 'a>;
    let runners: Vec<(u8, &'static str, Runner)> = vec![
        (1, "closed-form volumes by quadrature", Box::new(criterion_1)),
        (2, "Crofton baseline for RP^(2m)", Box::new(|| criterion_2(cfg))),
        (3, "Bezout cap and parity on the Fermat cubic", Box::new(|| criterion_3(cfg))),
        (4, "sigma constancy across isotropic planes", Box::new(|| criterion_4(cfg))),
        (5, "suspension and Wallis identity", Box::new(criterion_5)),
        (6, "Hamiltonian flow suite", Box::new(|| criterion_6(cfg))),
        (7, "byte-identical CSV across thread counts", Box::new(|| criterion_7(cfg))),
    ];
    runners
        .into_iter()
        .map(|(id, title, run)| {
            run().unwrap_or_else(|e| CriterionResult {
                id,
                title,
                passed: false,
                elapsed_secs: 0.0,
                budget_secs: None,
                details: vec![format!("error: {e}")],
            })
        })
        .collect()
}
