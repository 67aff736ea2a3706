//! `isovol` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 numeric failure.
//! A numeric failure also prints one JSON failure record on stderr.

mod config;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use isovol::crofton::{
    closed_form_volumes, crofton_volume, estimate_sigma, mc_expected_count_with, verify_minimization_inequality,
    BodyKind, CountableBody, McOptions,
};
use isovol::hamflow::{
    builtin_nonlinear_specs, check_minimization, horizontality_monitor, integrate_flow, volume_along_flow, FlowConfig,
    Hamiltonian, HamiltonianSpec,
};
use isovol::intersect::bezout_bound;
use isovol::numeric::{sphere_volume, wallis_integral};
use isovol::polynomial::{HomogeneousPoly, ImplicitRealLocus};
use isovol::report::{self, Series};
use isovol::selftest::{run_all, SelftestConfig};
use isovol::submanifolds::{clifford_torus, coordinate_cp, geodesic_rp, real_locus_charts, round_sphere, suspend};
use isovol::Error;

use config::{resolve, Resolved};

#[derive(Parser)]
#[command(
    name = "isovol",
    version,
    about = "Volumes of real projective spaces in CP^n: quadrature, Crofton counts and Hamiltonian flows",
    after_long_help = concat!("Defaults (precedence: flags > --config file > these):\n\n", include_str!("../defaults.toml"))
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature volume of a named body or of a real algebraic locus.
    Volume(Opts<VolumeFlags>),
    /// Haar-averaged intersection count, Crofton volume and the minimization inequality.
    Crofton(Opts<CroftonFlags>),
    /// Wedge-product constant of an isotropic plane, over several plane choices.
    Sigma(Opts<SigmaFlags>),
    /// Count histogram of a hypersurface against its Bezout bound.
    Bezout(Opts<BezoutFlags>),
    /// Hamiltonian flow of a horizontal sphere with volume and horizontality monitors.
    Flow(Opts<FlowFlags>),
    /// Suspension volume against the Wallis factor.
    SuspendCheck(Opts<SuspendFlags>),
    /// Run the full acceptance suite.
    Selftest(Opts<SelftestFlags>),
}

#[derive(Args)]
struct Opts<F: Args> {
    /// TOML file overriding the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    flags: F,
}

#[derive(Args, Serialize)]
struct VolumeFlags {
    /// rp | cp | sphere | clifford | locus
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    locus: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeConfig {
    body: String,
    k: usize,
    n: usize,
    locus: String,
    grid: usize,
    tolerance: f64,
}

#[derive(Args, Serialize)]
struct CroftonFlags {
    /// rp | locus
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    locus: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    special_unitary: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CroftonConfig {
    body: String,
    m: usize,
    n: usize,
    locus: String,
    samples: usize,
    seed: u64,
    special_unitary: bool,
}

#[derive(Args, Serialize)]
struct SigmaFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    planes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_spread: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaConfig {
    m: usize,
    n: usize,
    samples: usize,
    planes: usize,
    seed: u64,
    max_spread: f64,
}

#[derive(Args, Serialize)]
struct BezoutFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    locus: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BezoutConfig {
    locus: String,
    samples: usize,
    seed: u64,
    grid: usize,
}

#[derive(Args, Serialize)]
struct FlowFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<String>,
    /// monomial_quartic | mixed_scheduled
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    builtin: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoints: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mesh_scale: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_res: Option<usize>,
    /// SVG destination for the volume and horizontality plot.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    svg: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowConfigFile {
    hamiltonian: String,
    builtin: String,
    m: usize,
    n: usize,
    t_max: f64,
    dt: f64,
    checkpoints: usize,
    mesh_scale: usize,
    theta_res: usize,
    svg: String,
}

#[derive(Args, Serialize)]
struct SuspendFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuspendConfig {
    k: usize,
    tolerance: f64,
}

#[derive(Args, Serialize)]
struct SelftestFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelftestFile {
    seed: u64,
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric {
        kind: String,
        message: String,
        details: serde_json::Value,
    },
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure::Validation(msg.into())
    }

    fn numeric(kind: &str, message: impl Into<String>, details: serde_json::Value) -> Self {
        Failure::Numeric {
            kind: kind.into(),
            message: message.into(),
            details,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Unsupported(_)
            | Error::ParameterMismatch { .. }
            | Error::Json(_)
            | Error::ZeroForm
            | Error::NotHorizontal(_) => return Failure::Validation(e.to_string()),
            Error::NotUnit(_) => "not_unit",
            Error::BaseMismatch => "base_mismatch",
            Error::RankDeficient(_) => "rank_deficient",
            Error::DegenerateGram { .. } => "degenerate_gram",
            Error::SingularLocus { .. } => "singular_locus",
            Error::Configuration(_) => "sign_self_check",
            Error::StepSize { .. } => "step_size",
            Error::JacobianRankLoss { .. } => "jacobian_rank_loss",
        };
        Failure::numeric(kind, e.to_string(), json!(null))
    }
}

type Outcome = Result<(), Failure>;

/// CSV sink opened before any work, so an unwritable path fails validation.
struct Sink {
    file: Option<File>,
}

impl Sink {
    fn open(out: &str) -> Result<Self, Failure> {
        if out == "-" {
            return Ok(Sink { file: None });
        }
        let file = File::create(out).map_err(|e| Failure::validation(format!("cannot write {out}: {e}")))?;
        Ok(Sink { file: Some(file) })
    }

    fn write(&mut self, text: &str) -> Outcome {
        let res = match &mut self.file {
            Some(f) => f.write_all(text.as_bytes()),
            None => std::io::stdout().write_all(text.as_bytes()),
        };
        res.map_err(|e| Failure::validation(format!("write failed: {e}")))
    }
}

fn read_input(path: &str, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::validation(format!("cannot read {what} {path}: {e}")))
}

fn load_locus(path: &str) -> Result<ImplicitRealLocus, Failure> {
    Ok(ImplicitRealLocus::from_json(&read_input(path, "locus")?)?)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fmt_ref(v: Option<f64>) -> String {
    v.map(report::num).unwrap_or_default()
}

fn volume(c: &Resolved<VolumeConfig>, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let (label, body_volume, reference) = match v.body.as_str() {
        "rp" => ("RP", geodesic_rp(v.k, v.n)?.volume()?, Some(closed_form_volumes(BodyKind::Rp, v.k)?)),
        "cp" => ("CP", coordinate_cp(v.k, v.n)?.volume()?, Some(closed_form_volumes(BodyKind::Cp, v.k)?)),
        "sphere" => ("S", round_sphere(v.k, v.n)?.volume()?, Some(closed_form_volumes(BodyKind::Sphere, v.k)?)),
        "clifford" => ("T", clifford_torus(v.n)?.volume()?, None),
        "locus" => {
            if v.locus.is_empty() {
                return Err(Failure::validation("body = locus needs --locus"));
            }
            let locus = load_locus(&v.locus)?;
            ("V", real_locus_charts(&locus, v.grid)?.volume()?, None)
        }
        other => return Err(Failure::validation(format!("unknown body `{other}`"))),
    };
    let rel_err = reference.map(|r| rel(body_volume.value, r));
    let mut log = format!(
        "isovol volume: vol({label}^{}) = {:.9} ± {:.1e}",
        v.k, body_volume.value, body_volume.error
    );
    // the paired body of the same real dimension
    let paired = match v.body.as_str() {
        "rp" if v.k % 2 == 0 && v.k > 0 => Some((format!("CP^{}", v.k / 2), closed_form_volumes(BodyKind::Cp, v.k / 2)?)),
        "cp" => Some((format!("RP^{}", 2 * v.k), closed_form_volumes(BodyKind::Rp, 2 * v.k)?)),
        _ => None,
    };
    if let Some((name, pv)) = &paired {
        let rel_op = if body_volume.value < *pv { "<" } else { ">" };
        log.push_str(&format!("; vol({label}^{}) {rel_op} vol({name}) = {pv:.9}", v.k));
    }
    eprintln!("{log}");
    let head = report::header("volume", &c.echo());
    let row = vec![
        v.body.clone(),
        v.k.to_string(),
        v.n.to_string(),
        report::num(body_volume.value),
        report::num(body_volume.error),
        fmt_ref(reference),
        fmt_ref(rel_err),
        paired.as_ref().map(|p| p.0.clone()).unwrap_or_default(),
        fmt_ref(paired.as_ref().map(|p| p.1)),
    ];
    sink.write(&report::simple_csv(
        head,
        &["body", "k", "n", "volume", "error", "closed_form", "relative_error", "paired_body", "paired_volume"],
        &[row],
    ))?;
    if let Some(e) = rel_err {
        if e >= v.tolerance {
            return Err(Failure::numeric(
                "volume_tolerance",
                format!("relative error {e:e} exceeds {}", v.tolerance),
                json!({ "volume": body_volume.value, "closed_form": reference, "relative_error": e }),
            ));
        }
    }
    Ok(())
}

fn crofton(c: &Resolved<CroftonConfig>, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let body = match v.body.as_str() {
        "rp" => CountableBody::Rp2m,
        "locus" => {
            if v.locus.is_empty() {
                return Err(Failure::validation("body = locus needs --locus"));
            }
            CountableBody::Hypersurface(load_locus(&v.locus)?)
        }
        other => return Err(Failure::validation(format!("unknown body `{other}`"))),
    };
    let opts = McOptions {
        special_unitary: v.special_unitary,
    };
    let est = mc_expected_count_with(&body, v.m, v.n, v.samples, v.seed, opts)?;
    let vol = crofton_volume(&est, v.m, v.n)?;
    let check = verify_minimization_inequality(&est)?;
    eprintln!(
        "isovol crofton: {} m={} n={} mean_count={:.6} ± {:.1e} volume={} reference={:.9} holds={}",
        est.body, v.m, v.n, est.mean_count, est.stderr, vol, check.reference_volume, check.holds
    );
    if let Some(w) = &est.warning {
        eprintln!("isovol crofton: warning: {w}");
    }
    sink.write(&report::crofton_csv(report::header("crofton", &c.echo()), &[est.clone()])?)?;
    if !check.holds {
        return Err(Failure::numeric(
            "minimization_inequality",
            "Crofton volume falls below the totally geodesic reference",
            json!({
                "mean_count": est.mean_count, "stderr": est.stderr, "margin_sigmas": check.margin_sigmas,
                "min_count": check.min_count, "volume": vol.value, "reference_volume": check.reference_volume,
            }),
        ));
    }
    Ok(())
}

fn sigma(c: &Resolved<SigmaConfig>, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let s = estimate_sigma(v.m, v.n, v.samples, v.planes, v.seed)?;
    let spread = s.plane_choice_spread / s.mean_wedge;
    eprintln!(
        "isovol sigma: m={} n={} mean_wedge={:.6} ± {:.1e} spread/mean={:.3}% kappa={:.6}",
        v.m,
        v.n,
        s.mean_wedge,
        s.stderr,
        100.0 * spread,
        s.kappa
    );
    sink.write(&report::sigma_csv(report::header("sigma", &c.echo()), &[s.clone()]))?;
    if spread.is_nan() || spread >= v.max_spread {
        return Err(Failure::numeric(
            "sigma_not_constant",
            format!("plane-choice spread {spread:e} of the mean exceeds {}", v.max_spread),
            json!({ "mean_wedge": s.mean_wedge, "plane_means": s.plane_means }),
        ));
    }
    Ok(())
}

fn bezout(c: &Resolved<BezoutConfig>, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let locus = if v.locus.is_empty() {
        ImplicitRealLocus::hypersurface(HomogeneousPoly::fermat(4, 3))?
    } else {
        load_locus(&v.locus)?
    };
    let Some(m) = locus.half_dim() else {
        return Err(Failure::validation(format!(
            "locus of dimension {} has no half-dimensional count",
            locus.dim()
        )));
    };
    let n = locus.n();
    let bound = bezout_bound(&locus);
    let est = mc_expected_count_with(&CountableBody::Hypersurface(locus.clone()), m, n, v.samples, v.seed, McOptions::default())?;
    let vol = crofton_volume(&est, m, n)?;
    let parity = bound % 2;
    let bad_parity: Vec<usize> = est.histogram.keys().copied().filter(|k| *k as u64 % 2 != parity).collect();
    let max = est.max_count().unwrap_or(0) as u64;
    let quad = if v.grid > 0 {
        Some(real_locus_charts(&locus, v.grid)?.volume()?)
    } else {
        None
    };
    eprintln!(
        "isovol bezout: degrees={:?} bound={bound} histogram={:?} crofton volume={vol}{}",
        locus.degrees(),
        est.histogram,
        quad.map(|q| format!(" quadrature={:.6}", q.value)).unwrap_or_default()
    );
    let head = report::header("bezout", &c.echo());
    let mut text = report::histogram_csv(head, &est, bound);
    let summary = vec![
        m.to_string(),
        n.to_string(),
        report::num(est.mean_count),
        report::num(est.stderr),
        report::num(est.degenerate_fraction),
        report::num(vol.value),
        bound.to_string(),
        report::num(bound as f64 * closed_form_volumes(BodyKind::Rp, 2 * m)?),
        fmt_ref(quad.map(|q| q.value)),
    ];
    text.push_str(&report::simple_csv(
        String::new(),
        &[
            "m",
            "n",
            "mean_count",
            "stderr",
            "degenerate_fraction",
            "volume_estimate",
            "bezout_bound",
            "volume_bound",
            "quadrature_volume",
        ],
        &[summary],
    ));
    sink.write(&text)?;
    if max > bound || !bad_parity.is_empty() {
        return Err(Failure::numeric(
            "bezout_violation",
            format!("counts {:?} break the bound {bound} or its parity", est.histogram.keys().collect::<Vec<_>>()),
            json!({ "histogram": est.histogram, "bound": bound }),
        ));
    }
    Ok(())
}

fn load_spec(v: &FlowConfigFile) -> Result<(String, HamiltonianSpec), Failure> {
    if !v.hamiltonian.is_empty() {
        let spec = HamiltonianSpec::from_json(&read_input(&v.hamiltonian, "Hamiltonian")?)?;
        return Ok((v.hamiltonian.clone(), spec));
    }
    builtin_nonlinear_specs()
        .into_iter()
        .find(|(name, _)| *name == v.builtin)
        .map(|(name, spec)| (name.to_string(), spec))
        .ok_or_else(|| Failure::validation(format!("unknown built-in Hamiltonian `{}`", v.builtin)))
}

fn svg_path(v: &FlowConfigFile, out: &str) -> PathBuf {
    if !v.svg.is_empty() {
        PathBuf::from(&v.svg)
    } else if out == "-" {
        PathBuf::from("flow.svg")
    } else {
        Path::new(out).with_extension("svg")
    }
}

fn flow(c: &Resolved<FlowConfigFile>, out: &str, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let (name, spec) = load_spec(v)?;
    let svg = svg_path(v, out);
    let mut svg_file =
        File::create(&svg).map_err(|e| Failure::validation(format!("cannot write {}: {e}", svg.display())))?;
    let body = round_sphere(v.m, v.n)?;
    let h = Hamiltonian::new(&spec, v.n)?;
    let cfg = FlowConfig {
        t_max: v.t_max,
        dt: v.dt,
        checkpoints: v.checkpoints,
        mesh_scale: v.mesh_scale,
    };
    let states = integrate_flow(&body, &h, &cfg)?;
    let volumes = volume_along_flow(&states)?;
    let horiz: Vec<_> = states.iter().map(horizontality_monitor).collect();
    let check = check_minimization(&states, v.m, v.theta_res)?;
    sink.write(&report::flow_csv(report::header("flow", &c.echo()), &states, &volumes, &horiz))?;
    let chart = report::line_chart_svg(
        &format!("Hamiltonian flow: {name}"),
        "t",
        &[
            Series {
                label: "projected volume",
                points: volumes.iter().map(|s| (s.t, s.projected_volume)).collect(),
                log_scale: false,
            },
            Series {
                label: "horizontality defect",
                points: states.iter().zip(&horiz).map(|(s, h)| (s.t, h.defect)).collect(),
                log_scale: true,
            },
        ],
    );
    svg_file
        .write_all(chart.as_bytes())
        .map_err(|e| Failure::validation(format!("write failed: {e}")))?;
    let initial = horiz[0].defect;
    let growth = states
        .iter()
        .zip(&horiz)
        .find(|(_, r)| r.defect > 3.0 * initial.max(r.truncation));
    eprintln!(
        "isovol flow: {name} m={} n={} min projected volume={:.9} reference={:.9} peak defect={:.1e}",
        v.m,
        v.n,
        check.min_projected_volume,
        check.reference_volume,
        horiz.iter().map(|r| r.defect).fold(0.0, f64::max)
    );
    if let Some((s, r)) = growth {
        return Err(Failure::numeric(
            "horizontality_growth",
            format!("horizontality defect {:e} at t = {}", r.defect, s.t),
            json!({ "t": s.t, "defect": r.defect, "initial": initial, "truncation": r.truncation }),
        ));
    }
    if !check.holds {
        return Err(Failure::numeric(
            "minimization_inequality",
            "projected volume fell below the reference",
            json!({
                "offending_t": check.offending_t, "min_projected_volume": check.min_projected_volume,
                "reference_volume": check.reference_volume,
            }),
        ));
    }
    Ok(())
}

fn suspend_check(c: &Resolved<SuspendConfig>, sink: &mut Sink) -> Outcome {
    let v = &c.value;
    let base = round_sphere(v.k, v.k)?;
    let base_volume = base.volume()?;
    let sus = suspend(&base)?.volume()?;
    let exact = sphere_volume(v.k + 1);
    let wallis = wallis_integral(v.k);
    let ratio = sus.value / base_volume.value;
    let err = rel(sus.value, exact);
    let ratio_err = rel(ratio, wallis);
    eprintln!(
        "isovol suspend-check: vol(S^{k}) = {:.9}, vol(ΣS^{k}) = {:.9}, vol(S^{}) = {exact:.9}, ratio = {ratio:.9}, wallis = {wallis:.9}",
        base_volume.value,
        sus.value,
        v.k + 1,
        k = v.k
    );
    let row = vec![
        v.k.to_string(),
        report::num(base_volume.value),
        report::num(sus.value),
        report::num(exact),
        report::num(err),
        report::num(wallis),
        report::num(ratio),
    ];
    sink.write(&report::simple_csv(
        report::header("suspend-check", &c.echo()),
        &["k", "sphere_volume", "suspended_volume", "closed_form", "relative_error", "wallis_factor", "quadrature_ratio"],
        &[row],
    ))?;
    if err >= v.tolerance || ratio_err >= v.tolerance {
        return Err(Failure::numeric(
            "suspension_identity",
            format!("relative errors {err:e} (volume), {ratio_err:e} (ratio) exceed {}", v.tolerance),
            json!({ "suspended_volume": sus.value, "closed_form": exact, "ratio": ratio, "wallis": wallis }),
        ));
    }
    Ok(())
}

fn selftest(c: &Resolved<SelftestFile>, sink: &mut Sink) -> Outcome {
    let cfg = SelftestConfig {
        seed: c.value.seed,
        ..SelftestConfig::default()
    };
    let results = run_all(&cfg);
    for r in &results {
        eprintln!("{r}");
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.id.to_string(), r.title.to_string(), r.passed.to_string(), r.details.join("; ")])
        .collect();
    sink.write(&report::simple_csv(
        report::header("selftest", &c.echo()),
        &["criterion", "title", "passed", "details"],
        &rows,
    ))?;
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if !failed.is_empty() {
        return Err(Failure::numeric(
            "acceptance",
            format!("criteria {failed:?} failed"),
            json!({ "failed": failed }),
        ));
    }
    Ok(())
}

fn prepare<F: Args + Serialize, T: serde::de::DeserializeOwned>(
    section: &str,
    opts: &Opts<F>,
) -> Result<(Resolved<T>, Sink), Failure> {
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(Failure::validation("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::validation(e.to_string()))?;
    }
    let resolved = resolve(section, opts.config.as_deref(), &opts.flags)?;
    let sink = Sink::open(&opts.out)?;
    Ok((resolved, sink))
}

fn run(cli: Cli) -> (&'static str, Outcome) {
    macro_rules! go {
        ($name:literal, $section:literal, $opts:expr, |$c:ident, $s:ident| $body:expr) => {
            ($name, prepare($section, $opts).and_then(|(c, mut s)| {
                let ($c, $s) = (&c, &mut s);
                $body
            }))
        };
    }
    match &cli.command {
        Command::Volume(o) => go!("volume", "volume", o, |c, s| volume(c, s)),
        Command::Crofton(o) => go!("crofton", "crofton", o, |c, s| crofton(c, s)),
        Command::Sigma(o) => go!("sigma", "sigma", o, |c, s| sigma(c, s)),
        Command::Bezout(o) => go!("bezout", "bezout", o, |c, s| bezout(c, s)),
        Command::Flow(o) => go!("flow", "flow", o, |c, s| flow(c, &o.out, s)),
        Command::SuspendCheck(o) => go!("suspend-check", "suspend_check", o, |c, s| suspend_check(c, s)),
        Command::Selftest(o) => go!("selftest", "selftest", o, |c, s| selftest(c, s)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, outcome) = run(cli);
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("isovol {command}: error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric { kind, message, details }) => {
            let record = json!({
                "status": "failure",
                "command": command,
                "kind": kind,
                "message": message,
                "details": details,
                "commit": report::COMMIT,
            });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
