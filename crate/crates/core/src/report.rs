//! CSV tables and SVG line charts.
//!
//! Every table starts with one comment line
//! `# isovol-csv v1 command=<name> <key>=<value> … commit=<id>`.
//! Floats use the shortest round-trip representation ([`num`]), so equal
//! values always print to equal bytes.

use std::fmt::Write as _;

use crate::crofton::{crofton_volume, CroftonEstimate, SigmaEstimate};
use crate::error::Result;
use crate::hamflow::{FlowState, HorizontalityReport, VolumeSample};

pub const SCHEMA_VERSION: u32 = 1;

/// Commit the library was built from, or `unknown`.
pub const COMMIT: &str = env!("ISOVOL_COMMIT");

/// The header comment line. `config` is echoed in the given order.
pub fn header(command: &str, config: &[(&str, String)]) -> String {
    let mut h = format!("# isovol-csv v{SCHEMA_VERSION} command={command}");
    for (k, v) in config {
        let _ = write!(h, " {k}={v}");
    }
    let _ = writeln!(h, " commit={COMMIT}");
    h
}

/// Shortest round-trip text of `x`, in exponent form outside [1e-4, 1e16).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn table<R: AsRef<[String]>>(head: String, columns: &[&str], rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    head + &body
}

pub const CROFTON_COLUMNS: [&str; 11] = [
    "m",
    "n",
    "body",
    "n_samples",
    "seed",
    "mean_count",
    "stderr",
    "degenerate_fraction",
    "volume_estimate",
    "volume_low",
    "volume_high",
];

pub fn crofton_csv(head: String, estimates: &[CroftonEstimate]) -> Result<String> {
    let rows = estimates
        .iter()
        .map(|e| {
            let v = crofton_volume(e, e.m, e.n)?;
            Ok(vec![
                e.m.to_string(),
                e.n.to_string(),
                e.body.clone(),
                e.n_samples.to_string(),
                e.seed.to_string(),
                num(e.mean_count),
                num(e.stderr),
                num(e.degenerate_fraction),
                num(v.value),
                num(v.low),
                num(v.high),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table(head, &CROFTON_COLUMNS, &rows))
}

/// One row per observed count: `m, n, body, count, frequency, bezout_bound`.
pub fn histogram_csv(head: String, est: &CroftonEstimate, bound: u64) -> String {
    let rows: Vec<Vec<String>> = est
        .histogram
        .iter()
        .map(|(count, freq)| {
            vec![
                est.m.to_string(),
                est.n.to_string(),
                est.body.clone(),
                count.to_string(),
                freq.to_string(),
                bound.to_string(),
            ]
        })
        .collect();
    table(head, &["m", "n", "body", "count", "frequency", "bezout_bound"], &rows)
}

pub fn sigma_csv(head: String, estimates: &[SigmaEstimate]) -> String {
    let rows: Vec<Vec<String>> = estimates
        .iter()
        .map(|s| {
            vec![
                s.m.to_string(),
                s.n.to_string(),
                s.n_samples.to_string(),
                s.n_planes.to_string(),
                s.seed.to_string(),
                num(s.mean_wedge),
                num(s.stderr),
                num(s.plane_choice_spread),
                num(s.plane_choice_spread / s.mean_wedge),
                num(s.kappa),
            ]
        })
        .collect();
    table(
        head,
        &[
            "m",
            "n",
            "n_samples",
            "n_planes",
            "seed",
            "mean_wedge",
            "stderr",
            "plane_choice_spread",
            "relative_spread",
            "kappa",
        ],
        &rows,
    )
}

/// `t, sphere_volume, projected_volume, horizontality_defect, unit_norm_drift`.
pub fn flow_csv(head: String, states: &[FlowState], volumes: &[VolumeSample], horizontality: &[HorizontalityReport]) -> String {
    let rows: Vec<Vec<String>> = states
        .iter()
        .zip(volumes)
        .zip(horizontality)
        .map(|((s, v), h)| {
            vec![
                num(s.t),
                num(v.sphere_volume),
                num(v.projected_volume),
                num(h.defect),
                num(s.max_step_drift),
            ]
        })
        .collect();
    table(
        head,
        &["t", "sphere_volume", "projected_volume", "horizontality_defect", "unit_norm_drift"],
        &rows,
    )
}

/// Generic table for the smaller reports.
pub fn simple_csv(head: String, columns: &[&str], rows: &[Vec<String>]) -> String {
    table(head, columns, rows)
}

/// One plotted series.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub log_scale: bool,
}

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 60.0;

/// Stacked static line charts, one panel per series, sharing the x axis.
pub fn line_chart_svg(title: &str, x_label: &str, series: &[Series<'_>]) -> String {
    let width = PANEL_W + 2.0 * MARGIN;
    let height = series.len() as f64 * (PANEL_H + MARGIN) + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    for (i, s) in series.iter().enumerate() {
        let top = MARGIN + i as f64 * (PANEL_H + MARGIN);
        panel(&mut svg, s, top, x_label);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, s: &Series<'_>, top: f64, x_label: &str) {
    let tr = |y: f64| if s.log_scale { y.abs().log10() } else { y };
    let pts: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| (x, tr(y))).filter(|p| p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = if pts.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1));
        (x0, x1, y0, y1)
    };
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 1e-12 * y1.abs().max(1.0) {
        let pad = 1e-6 * y1.abs().max(1.0);
        y0 -= pad;
        y1 += pad;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * PANEL_W;
    let py = |y: f64| top + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let label = if s.log_scale { format!("log10 {}", s.label) } else { s.label.to_string() };
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}">{}</text>"#, top - 8.0, escape(&label));
    for (v, anchor_y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            anchor_y + 4.0,
            tick(v)
        );
    }
    for v in [x0, x1] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(v),
            top + PANEL_H + 16.0,
            tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + PANEL_W / 2.0,
        top + PANEL_H + 32.0,
        escape(x_label)
    );
    let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
        path.join(" ")
    );
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crofton::{mc_expected_count, CountableBody};

    #[test]
    fn num_round_trips() {
        for x in [0.0, 1.0, 6.283185307179586, 7.598956278425923e-15, -2.5e-5, 1e20, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(7.5e-15), "7.5e-15");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn header_line() {
        let h = header("crofton", &[("m", "1".into()), ("seed", "42".into())]);
        assert!(h.starts_with("# isovol-csv v1 command=crofton m=1 seed=42 commit="));
        assert!(h.ends_with('\n'));
    }

    #[test]
    fn crofton_rows() {
        let est = mc_expected_count(&CountableBody::Rp2m, 1, 2, 200, 3).unwrap();
        let text = crofton_csv(header("crofton", &[]), &[est]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], CROFTON_COLUMNS.join(","));
        assert!(lines[2].starts_with("1,2,rp2m,200,3,1,0,0,6.283185307179586,"));
    }

    #[test]
    fn quoting_of_labels_with_commas() {
        let text = simple_csv(String::new(), &["a"], &[vec!["x,y".into()]]);
        assert_eq!(text, "a\n\"x,y\"\n");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = line_chart_svg(
            "flow",
            "t",
            &[
                Series {
                    label: "volume",
                    points: vec![(0.0, 1.0), (1.0, 2.0)],
                    log_scale: false,
                },
                Series {
                    label: "defect",
                    points: vec![(0.0, 0.0), (1.0, 1e-9)],
                    log_scale: true,
                },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
