use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::classical::ClassicalRow;
use crate::error::{Error, Result};
use crate::harness::ScenarioRun;
use crate::quantum::Spectrum;
use crate::weylvol::{BSLattice, BandSpec};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        other => Error::Serialization(format!("{other:?}")),
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct SpectrumCsvRow {
    m: i64,
    idx: usize,
    re_z: f64,
    im_z: f64,
    im_over_eps: Option<f64>,
    grid_n: usize,
}

#[derive(Serialize)]
struct DampedCsvRow {
    m: i64,
    idx: i64,
    re_tau: f64,
    im_tau: f64,
}

/// Writes every artifact present in `run` into `dir` and returns the paths.
pub fn emit_outputs(run: &ScenarioRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::new();
    let mut push = |name: &str| {
        let p = dir.join(name);
        out.push(p.clone());
        p
    };

    write_json(&push("report.json"), &run.report)?;
    write_json(&push("timings.json"), &run.timings)?;
    let cfg_path = push("config.toml");
    fs::write(&cfg_path, run.report.config.to_toml()?).map_err(io_err(&cfg_path))?;

    let art = &run.artifacts;
    if !art.classical.is_empty() {
        let rows = art.classical.iter().map(ClassicalRow::from);
        write_csv(
            &push("classical.csv"),
            &["a", "omega", "iota", "J1", "q_avg", "qinf_lo", "qinf_hi", "dioph_kind", "dioph_p", "dioph_q"],
            rows,
        )?;
    }
    if let Some(p) = &art.prediction {
        write_json(&push("prediction.json"), p)?;
    }
    if let Some(s) = &art.spectrum {
        let rows = s.entries.iter().map(|e| SpectrumCsvRow {
            m: e.m,
            idx: e.index,
            re_z: e.z.re,
            im_z: e.z.im,
            im_over_eps: (s.eps > 0.0).then(|| e.z.im / s.eps),
            grid_n: e.grid_n,
        });
        write_csv(&push("spectrum.csv"), &["m", "idx", "re_z", "im_z", "im_over_eps", "grid_n"], rows)?;
    }
    if let Some(l) = &art.lattice {
        write_csv(&push("lattice.csv"), &["k", "m", "re_z", "im_z_over_eps", "a"], l.points.iter())?;
    }
    if run.report.config.damped.is_some() && run.report.damped.is_some() {
        let rows = art.damped.iter().map(|d| DampedCsvRow {
            m: d.m,
            idx: d.index,
            re_tau: d.tau.re,
            im_tau: d.tau.im,
        });
        write_csv(&push("dampedwave.csv"), &["m", "idx", "re_tau", "im_tau"], rows)?;
    }
    if art.spectrum.is_some() || art.lattice.is_some() {
        let h = run.report.rows.last().map_or(1.0, |r| r.h);
        let band = run.report.config.band_at(h);
        let svg = render_svg(art.spectrum.as_ref(), art.lattice.as_ref(), &band);
        let p = push("spectrum.svg");
        fs::write(&p, svg).map_err(io_err(&p))?;
    }
    Ok(out)
}

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 700.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|k| k * mag)
        .find(|s| span / s <= 8.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Scatter of `(Re z, Im z/ε)` with the counting rectangle dashed. Quantum
/// eigenvalues are filled circles, lattice points open squares. With
/// `ε = 0` the vertical axis shows `Im z`.
pub fn render_svg(spectrum: Option<&Spectrum>, lattice: Option<&BSLattice>, band: &BandSpec) -> String {
    let eps = spectrum.map_or(band.eps, |s| s.eps);
    let scale = if eps > 0.0 { eps } else { 1.0 };
    let quantum: Vec<(f64, f64)> = spectrum
        .map(|s| s.entries.iter().map(|e| (e.z.re, e.z.im / scale)).collect())
        .unwrap_or_default();
    let classical: Vec<(f64, f64)> = lattice
        .map(|l| l.points.iter().map(|p| (p.re_z, p.im_z_over_eps)).collect())
        .unwrap_or_default();

    let (mut x0, mut x1, mut y0, mut y1) = (band.e2, band.e4, band.f3, band.f1);
    for &(x, y) in quantum.iter().chain(&classical) {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    let (px, py) = (0.04 * (x1 - x0).max(1e-12), 0.06 * (y1 - y0).max(1e-12));
    let (x0, x1, y0, y1) = (x0 - px, x1 + px, y0 - py, y1 + py);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{c:.2}" stroke="black"/><text x="{x:.2}" y="{d:.2}" text-anchor="middle">{t}</text>"#,
            b = TOP + ph,
            c = TOP + ph + 6.0,
            d = TOP + ph + 22.0
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{a:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{b:.2}" y="{c:.2}" text-anchor="end">{t}</text>"#,
            a = LEFT - 6.0,
            b = LEFT - 10.0,
            c = y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Re z</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 20.0
    );
    let ylabel = if eps > 0.0 { "Im z / eps" } else { "Im z" };
    let _ = writeln!(
        s,
        r#"<text x="25" y="{:.2}" text-anchor="middle" transform="rotate(-90 25 {:.2})">{ylabel}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let _ = writeln!(s, r##"<g fill="none" stroke="#d95f02" stroke-width="1">"##);
    for &(x, y) in &classical {
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="6" height="6"/>"#, sx(x) - 3.0, sy(y) - 3.0);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g fill="#1b6ac9" fill-opacity="0.8">"##);
    for &(x, y) in quantum.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.2"/>"#, sx(x), sy(y));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="8 5"/>"#,
        sx(band.e2),
        sy(band.f1),
        sx(band.e4) - sx(band.e2),
        sy(band.f3) - sy(band.f1)
    );
    let lx = LEFT + pw - 190.0;
    let _ = writeln!(
        s,
        r##"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="#1b6ac9"/><text x="{c:.2}" y="{d:.2}">eigenvalues ({nq})</text>"##,
        a = lx,
        b = TOP + 18.0,
        c = lx + 10.0,
        d = TOP + 22.0,
        nq = quantum.len()
    );
    let _ = writeln!(
        s,
        r##"<rect x="{a:.2}" y="{b:.2}" width="6" height="6" fill="none" stroke="#d95f02"/><text x="{c:.2}" y="{d:.2}">lattice points ({nl})</text>"##,
        a = lx - 3.0,
        b = TOP + 35.0,
        c = lx + 10.0,
        d = TOP + 42.0,
        nl = classical.len()
    );
    s.push_str("</svg>\n");
    s
}
