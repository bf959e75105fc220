//! Telemetry CSV, metrics text and SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{Metrics, Record, Scenario, SimulationResult, Telemetry};

/// Column names in file order.
pub fn telemetry_header(tel: &Telemetry) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(tel.state_names.iter().cloned());
    let m = tel.input_names.len();
    let idx = |h: &mut Vec<String>, sig: &str, n: usize| h.extend((1..=n).map(|i| format!("{sig}[{i}]")));
    for sig in ["e_yI", "w_f", "y_cmd", "y_reg", "z_lim", "u_bl_cmd", "w", "v", "u_cmd", "u"] {
        idx(&mut h, sig, m);
    }
    for sig in ["g", "h", "dG", "dH"] {
        idx(&mut h, sig, 2 * m);
    }
    for sig in ["lambda1", "lambda2", "gamma1", "gamma2"] {
        idx(&mut h, sig, m);
    }
    h
}

/// Values of one record in header order.
pub fn record_row(r: &Record) -> Vec<f64> {
    let mut row = vec![r.t];
    for part in [
        &r.x_p,
        &r.e_yi,
        &r.w_f,
        &r.y_cmd,
        &r.y_reg,
        &r.z_lim,
        &r.u_bl_cmd,
        &r.w,
        &r.v,
        &r.u_cmd,
        &r.u,
        &r.g,
        &r.h,
        &r.delta_g,
        &r.delta_h,
        &r.multipliers.lambda1,
        &r.multipliers.lambda2,
        &r.multipliers.gamma1,
        &r.multipliers.gamma2,
    ] {
        row.extend_from_slice(part);
    }
    row
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_telemetry_csv<W: Write>(out: W, tel: &Telemetry) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(telemetry_header(tel))?;
    for r in &tel.records {
        w.write_record(record_row(r).into_iter().map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus numeric rows of a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_csv_table<R: Read>(input: R) -> Result<CsvTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", k + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// One plotted line.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// A stack of panels sharing the time axis.
#[derive(Clone, Debug)]
pub struct Figure {
    pub title: String,
    pub panels: Vec<Panel>,
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub ylabel: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MAX_POINTS: usize = 1500;

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn decimate(points: &[(f64, f64)]) -> impl Iterator<Item = &(f64, f64)> {
    let stride = points.len().div_ceil(MAX_POINTS).max(1);
    points
        .iter()
        .enumerate()
        .filter(move |(k, _)| k % stride == 0 || *k + 1 == points.len())
        .map(|(_, p)| p)
}

impl Figure {
    pub fn to_svg(&self) -> String {
        let (width, panel_h, left, right, top, gap) = (760.0, 200.0, 70.0, 150.0, 36.0, 34.0);
        let height = top + self.panels.len() as f64 * (panel_h + gap) + 10.0;
        let plot_w = width - left - right;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            width / 2.0,
            escape(&self.title)
        );
        for (p, panel) in self.panels.iter().enumerate() {
            let y0 = top + p as f64 * (panel_h + gap);
            let all = panel.series.iter().flat_map(|se| se.points.iter());
            let (mut tmin, mut tmax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &(t, v) in all.filter(|(t, v)| t.is_finite() && v.is_finite()) {
                tmin = tmin.min(t);
                tmax = tmax.max(t);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
            let (tmin, tmax) = if tmin < tmax { (tmin, tmax) } else { (0.0, 1.0) };
            let (vmin, vmax) = nice_range(vmin, vmax);
            let sx = |t: f64| left + (t - tmin) / (tmax - tmin) * plot_w;
            let sy = |v: f64| y0 + panel_h - (v - vmin) / (vmax - vmin) * panel_h;
            let _ = writeln!(
                s,
                r##"<rect x="{left}" y="{y0}" width="{plot_w}" height="{panel_h}" fill="none" stroke="#444"/>"##
            );
            for k in 0..=4 {
                let v = vmin + (vmax - vmin) * k as f64 / 4.0;
                let t = tmin + (tmax - tmin) * k as f64 / 4.0;
                let _ = writeln!(
                    s,
                    r##"<line x1="{left}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
                    left + plot_w,
                    left - 4.0,
                    sy(v) + 4.0,
                    y = sy(v)
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{}" text-anchor="middle">{t:.1}</text>"#,
                    sx(t),
                    y0 + panel_h + 14.0
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">{}</text>"#,
                y0 + panel_h / 2.0,
                y0 + panel_h / 2.0,
                escape(&panel.ylabel)
            );
            for (k, se) in panel.series.iter().enumerate() {
                let color = PALETTE[k % PALETTE.len()];
                let mut path = String::new();
                for (i, &(t, v)) in decimate(&se.points).enumerate() {
                    let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(t), sy(v.clamp(vmin, vmax)));
                }
                let dash = if se.dashed { r#" stroke-dasharray="5,3""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.3"{dash}/>"#,
                    path.trim_end()
                );
                let ly = y0 + 12.0 + 14.0 * k as f64;
                let _ = writeln!(
                    s,
                    r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                    left + plot_w + 8.0,
                    left + plot_w + 26.0,
                    left + plot_w + 30.0,
                    ly + 4.0,
                    escape(&se.label)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn series(tel: &Telemetry, label: String, f: impl Fn(&Record) -> f64, dashed: bool) -> Series {
    Series {
        label,
        points: tel.records.iter().map(|r| (r.t, f(r))).collect(),
        dashed,
    }
}

fn constant(tel: &Telemetry, label: String, v: f64) -> Series {
    let t0 = tel.records.first().map_or(0.0, |r| r.t);
    let t1 = tel.records.last().map_or(1.0, |r| r.t);
    Series {
        label,
        points: vec![(t0, v), (t1, v)],
        dashed: true,
    }
}

/// The four diagnostic figures `(file stem, figure)` of one run.
pub fn standard_figures(scenario: &Scenario, tel: &Telemetry) -> Vec<(&'static str, Figure)> {
    let lim = &scenario.limits;
    let per = |names: &[String], build: &dyn Fn(usize, &str) -> Panel| -> Vec<Panel> {
        names.iter().enumerate().map(|(i, n)| build(i, n)).collect()
    };
    let tracking = per(&tel.output_names, &|i, n| Panel {
        ylabel: n.to_string(),
        series: vec![
            series(tel, format!("{n}"), |r| r.y_reg[i], false),
            series(tel, format!("{n} cmd"), |r| r.y_cmd[i], true),
        ],
    });
    let controls = per(&tel.input_names, &|i, n| Panel {
        ylabel: n.to_string(),
        series: vec![
            series(tel, "u_cmd".into(), |r| r.u_cmd[i], false),
            series(tel, "u".into(), |r| r.u[i], false),
            series(tel, "u_bl_cmd".into(), |r| r.u_bl_cmd[i], false),
            constant(tel, "max".into(), lim.u_max[i]),
            constant(tel, "min".into(), lim.u_min[i]),
        ],
    });
    let constraints = per(&tel.limited_names, &|i, n| Panel {
        ylabel: n.to_string(),
        series: vec![
            series(tel, format!("{n}"), |r| r.z_lim[i], false),
            constant(tel, "max".into(), lim.z_max[i]),
            constant(tel, "min".into(), lim.z_min[i]),
        ],
    });
    let integrators = per(&tel.output_names, &|i, n| Panel {
        ylabel: format!("e_yI {n}"),
        series: vec![
            series(tel, "e_yI".into(), |r| r.e_yi[i], false),
            series(tel, "v".into(), |r| r.v[i], false),
        ],
    });
    let title = |what: &str| format!("{}: {what}", scenario.name);
    vec![
        ("tracking", Figure { title: title("tracking"), panels: tracking }),
        ("controls", Figure { title: title("controls"), panels: controls }),
        ("constraints", Figure { title: title("limited outputs"), panels: constraints }),
        ("integrators", Figure { title: title("integrator states"), panels: integrators }),
    ]
}

pub fn metrics_text(metrics: &Metrics, tel: &Telemetry) -> String {
    metrics.to_key_value(tel)
}

/// Writes `telemetry.csv`, `metrics.txt` and one SVG per signal group.
pub fn write_run(dir: &Path, scenario: &Scenario, result: &SimulationResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join("telemetry.csv");
    write_telemetry_csv(std::io::BufWriter::new(fs::File::create(&csv_path)?), &result.telemetry)?;
    written.push(csv_path);
    let metrics_path = dir.join("metrics.txt");
    fs::write(&metrics_path, metrics_text(&result.metrics, &result.telemetry))?;
    written.push(metrics_path);
    for (stem, fig) in standard_figures(scenario, &result.telemetry) {
        let p = dir.join(format!("{stem}.svg"));
        fs::write(&p, fig.to_svg())?;
        written.push(p);
    }
    Ok(written)
}

/// Markdown-style table of headline metrics across runs, angles in degrees.
pub fn summary_table(runs: &[(&Scenario, &SimulationResult)]) -> String {
    let mut s = String::from(
        "| scenario | max abs u_cmd (deg) | max u_cmd violation (deg) | max abs z_lim (deg/s) | max z_lim violation (deg/s) | max abs e_yI | saturated samples |\n|---|---|---|---|---|---|---|\n",
    );
    let list = |v: &[f64], deg: bool| {
        v.iter()
            .map(|x| format!("{:.3}", if deg { x.to_degrees() } else { *x }))
            .collect::<Vec<_>>()
            .join(" / ")
    };
    for (sc, res) in runs {
        let m = &res.metrics;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            sc.name,
            list(&m.max_abs_u_cmd, true),
            list(&m.max_control_violation, true),
            list(&m.max_abs_z_lim, true),
            list(&m.max_output_violation, true),
            list(&m.max_abs_integrator, false),
            m.saturation_samples
        );
    }
    s
}
