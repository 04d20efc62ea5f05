//! CSV files (17 significant digits, atomic writes) and SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use floquet_decay::SurvivalTrace;

use crate::CliError;

/// Full-precision decimal: 17 significant digits, round-trips every f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a sibling temporary file and renames, so a reader never
/// sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

pub const THETA_HEADER: [&str; 4] = ["t", "re_theta", "im_theta", "abs2"];

pub fn write_theta(path: &Path, trace: &SurvivalTrace) -> Result<(), CliError> {
    let rows = trace.t_grid.iter().zip(&trace.theta).map(|(t, z)| vec![num(*t), num(z.re), num(z.im), num(z.norm_sqr())]);
    write_csv(path, &THETA_HEADER, rows)
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    /// `log10 |theta|^2` against `t`; nonpositive values are dropped.
    pub fn log_survival(label: impl Into<String>, trace: &SurvivalTrace) -> Self {
        let points = trace.t_grid.iter().zip(&trace.theta).filter(|(_, z)| z.norm_sqr() > 0.0).map(|(t, z)| (*t, z.norm_sqr().log10())).collect();
        Series { label: label.into(), points }
    }
}

/// Series beyond this many are drawn but left out of the legend.
const LEGEND_ROWS: usize = 8;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Round tick spacing (1, 2 or 5 times a power of ten) for about six ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn bounds(series: &[Series], f: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let (lo, hi) = series.iter().flat_map(|s| s.points.iter().map(&f)).filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Self-contained SVG with axes, ticks and a legend. Presentation only.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (760.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let (x0, x1) = bounds(series, |p| p.0);
    let (y0, y1) = bounds(series, |p| p.1);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (lo, hi, vertical) in [(x0, x1, true), (y0, y1, false)] {
        let step = tick_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        while v <= hi + 1e-9 * step {
            let label = format!("{}", (v / step).round() * step);
            if vertical {
                let x = sx(v);
                let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{mt}" x2="{x:.1}" y2="{}" stroke="#ddd"/><text x="{x:.1}" y="{}" text-anchor="middle">{label}</text>"##, mt + ph, mt + ph + 16.0);
            } else {
                let y = sy(v);
                let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{label}</text>"##, ml + pw, ml - 6.0, y + 4.0);
            }
            v += step;
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, mt + ph / 2.0, mt + ph / 2.0, escape(y_label));

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        // a few thousand vertices is plenty at this size
        let stride = (ser.points.len() / 4000).max(1);
        let pts: Vec<String> = ser.points.iter().step_by(stride).filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#, pts.join(" "));
        if i >= LEGEND_ROWS {
            continue;
        }
        let ly = mt + 16.0 + 16.0 * i as f64;
        let lx = ml + pw - 150.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, lx + 20.0, lx + 26.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.trim_start_matches('-').split('e').next().unwrap().replace('.', "").len(), 17);
        }
    }

    #[test]
    fn plot_is_well_formed() {
        let ser = vec![Series { label: "a<b".into(), points: vec![(0.0, 0.0), (1.0, -2.0), (2.0, f64::NAN)] }];
        let svg = line_plot("t", "x", "y", &ser);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b") && !svg.contains("NaN"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(500.0), 100.0);
        assert_eq!(tick_step(7.0), 2.0);
        assert_eq!(tick_step(0.03), 0.005);
    }
}
