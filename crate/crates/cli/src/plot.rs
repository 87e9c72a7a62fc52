//! SVG line plots of sweep tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use usc_radiance::scenario::table::{format_float, Table};
use usc_radiance::SweepResult;

struct Layout {
    table: &'static str,
    x: &'static str,
    ys: &'static [&'static str],
    group: &'static [&'static str],
}

const LAYOUTS: &[Layout] = &[
    Layout { table: "energy_spectrum", x: "lambda", ys: &["energy"], group: &["theta", "n_qubits", "level"] },
    Layout { table: "radiance", x: "omega_d", ys: &["R"], group: &["theta", "lambda"] },
    Layout { table: "detuning", x: "omega_d", ys: &["R"], group: &["omega_c"] },
    Layout { table: "peak_map", x: "lambda", ys: &["lp", "rp", "r_max"], group: &["theta", "Omega"] },
    Layout { table: "excitation", x: "omega_d", ys: &["flux"], group: &["theta", "n_qubits", "lambda"] },
    Layout { table: "parity", x: "omega_d", ys: &["r_full", "r_dropped"], group: &["theta", "lambda"] },
];

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn series(t: &Table, layout: &Layout) -> Series {
    let x = t.column(layout.x).unwrap_or_default();
    let groups: Vec<Vec<f64>> = layout.group.iter().filter_map(|g| t.column(g)).collect();
    let mut out: BTreeMap<(usize, String), Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for y_name in layout.ys {
        let Some(y) = t.column(y_name) else { continue };
        for i in 0..t.rows.len() {
            let key: Vec<String> = layout
                .group
                .iter()
                .zip(&groups)
                .map(|(g, col)| format!("{g}={}", short(col[i])))
                .collect();
            let label = if layout.ys.len() > 1 {
                format!("{y_name} {}", key.join(" "))
            } else {
                key.join(" ")
            };
            let idx = match order.iter().position(|l| *l == label) {
                Some(k) => k,
                None => {
                    order.push(label.clone());
                    order.len() - 1
                }
            };
            out.entry((idx, label)).or_default().push((x[i], y[i]));
        }
    }
    out.into_iter().map(|((_, l), pts)| (l, pts)).collect()
}

fn short(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        format_float(v)
    } else {
        s.to_string()
    }
}

fn bounds(data: &Series) -> Option<((f64, f64), (f64, f64))> {
    let pts = data.iter().flat_map(|(_, p)| p).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return None;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0).max(1e-12);
    Some(((x0, x1), (y0 - pad, y1 + pad)))
}

fn draw(path: &Path, title: &str, layout: &Layout, data: &Series) -> Result<(), Box<dyn std::error::Error>> {
    let Some(((x0, x1), (y0, y1))) = bounds(data) else {
        return Ok(());
    };
    let root = SVGBackend::new(path, (960, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(layout.x).y_desc(layout.ys.join(", ")).draw()?;
    for (k, (label, pts)) in data.iter().enumerate() {
        let colour = Palette99::pick(k).to_rgba();
        // NaN points split a curve into separate segments
        for run in pts.split(|(_, y)| !y.is_finite()).filter(|r| !r.is_empty()) {
            chart.draw_series(LineSeries::new(run.iter().copied(), colour.stroke_width(1)))?;
        }
        if data.len() <= 12 {
            chart
                .draw_series(std::iter::once(PathElement::new(Vec::<(f64, f64)>::new(), colour)))?
                .label(label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], colour));
        }
    }
    if data.len() <= 12 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
    }
    root.present()?;
    Ok(())
}

/// One SVG per plottable table of `result`, next to its CSV.
pub fn write_plots(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    for layout in LAYOUTS {
        let Some(t) = result.table(layout.table) else { continue };
        let mut layout_x = layout.x;
        if layout.table == "peak_map" && result.spec.axis1.name == "Omega" {
            layout_x = "Omega";
        }
        let adjusted = Layout { x: layout_x, ..*layout };
        let data = series(t, &adjusted);
        let path = dir.join(format!("{}.svg", layout.table));
        draw(&path, result.spec.scenario.name(), &adjusted, &data)
            .map_err(|e| format!("plot {}: {e}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
