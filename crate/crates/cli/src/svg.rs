//! Deterministic SVG figures from saved run artifacts.
//!
//! Four figure kinds: the robustness/accuracy tradeoff scatter, test-radius
//! sweep curves, the radius-evolution curve, and radius histograms. Output
//! contains no timestamps and uses fixed-precision coordinates, so identical
//! inputs give byte-identical files. Rendering only scales numbers that
//! already exist in reports or memory statistics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use iaat_core::eval::epsilon_statistics;

use crate::config::E255;
use crate::error::{CliError, Result};
use crate::memcsv::read_memory_csv;
use crate::report_io::ReportFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    TradeoffScatter,
    SweepLines,
    EpsEvolution,
    EpsHistogram,
}

impl PlotKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "tradeoff_scatter" => PlotKind::TradeoffScatter,
            "sweep_lines" => PlotKind::SweepLines,
            "eps_evolution" => PlotKind::EpsEvolution,
            "eps_histogram" => PlotKind::EpsHistogram,
            other => {
                return Err(CliError::Config(format!(
                    "unknown plot kind '{other}' (tradeoff_scatter, sweep_lines, \
                     eps_evolution, eps_histogram)"
                )))
            }
        })
    }
}

/// A figure request: what to draw, from which inputs, to which file.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// Report JSONs for the scatter/sweep kinds, memory CSVs for the
    /// radius kinds.
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    /// Whitebox protocol supplying the robustness axis of the scatter;
    /// defaults to the first protocol of the first report.
    pub protocol: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] =
    ["#1f6fb2", "#d1495b", "#3c8d5a", "#8a5cb8", "#c98a2b", "#50757d"];

struct Canvas {
    body: String,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Canvas {
    fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        let pad = |lo: &mut f64, hi: &mut f64| {
            if *hi - *lo < 1e-9 {
                *lo -= 0.5;
                *hi += 0.5;
            }
        };
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (x_lo, x_hi, y_lo, y_hi);
        pad(&mut x_lo, &mut x_hi);
        pad(&mut y_lo, &mut y_hi);
        Self { body: String::new(), x_lo, x_hi, y_lo, y_hi }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let x0 = MARGIN_L;
        let x1 = WIDTH - MARGIN_R;
        let y0 = HEIGHT - MARGIN_B;
        let y1 = MARGIN_T;
        let _ = write!(
            self.body,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
        );
        for i in 0..=4 {
            let fx = self.x_lo + (self.x_hi - self.x_lo) * i as f64 / 4.0;
            let fy = self.y_lo + (self.y_hi - self.y_lo) * i as f64 / 4.0;
            let px = self.sx(fx);
            let py = self.sy(fy);
            let _ = write!(
                self.body,
                r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{fx:.3}</text>"#,
                y0 + 4.0,
                y0 + 18.0
            );
            let _ = write!(
                self.body,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{fy:.3}</text>"#,
                x0 - 4.0,
                x0 - 7.0,
                py + 4.0
            );
        }
        let _ = write!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{x_label}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0
        );
        let _ = write!(
            self.body,
            r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{y_label}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, dashed: bool) {
        if points.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, self.sx(x), self.sy(y));
        }
        let dash = if dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = write!(
            self.body,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#
        );
    }

    fn circle(&mut self, x: f64, y: f64, color: &str) {
        let _ = write!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4.5" fill="{color}"/>"#,
            self.sx(x),
            self.sy(y)
        );
    }

    fn diamond(&mut self, x: f64, y: f64, color: &str) {
        let (cx, cy) = (self.sx(x), self.sy(y));
        let _ = write!(
            self.body,
            r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z" fill="{color}"/>"#,
            cx,
            cy - 6.0,
            cx + 6.0,
            cy,
            cx,
            cy + 6.0,
            cx - 6.0,
            cy
        );
    }

    fn bar(&mut self, x0: f64, x1: f64, y: f64, color: &str, filled: bool) {
        let left = self.sx(x0);
        let width = (self.sx(x1) - left).max(0.5);
        let top = self.sy(y);
        let height = (self.sy(0.0) - top).max(0.0);
        let style = if filled {
            format!(r#"fill="{color}" fill-opacity="0.65""#)
        } else {
            format!(r#"fill="none" stroke="{color}" stroke-width="1.5""#)
        };
        let _ = write!(
            self.body,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{width:.2}" height="{height:.2}" {style}/>"#
        );
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = MARGIN_T + 6.0 + 16.0 * i as f64;
            let _ = write!(
                self.body,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{label}</text>"#,
                MARGIN_L + 8.0,
                y,
                MARGIN_L + 23.0,
                y + 9.0
            );
        }
    }

    fn finish(self, title: &str) -> String {
        format!(
            r#"<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" xmlns="http://www.w3.org/2000/svg"><rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/><text x="{:.2}" y="20" font-size="14" text-anchor="middle">{title}</text>{}</svg>"#,
            WIDTH / 2.0,
            self.body
        )
    }
}

fn load_reports(paths: &[PathBuf]) -> Result<Vec<ReportFile>> {
    if paths.is_empty() {
        return Err(CliError::Config("plot needs at least one input".into()));
    }
    paths.iter().map(|p| ReportFile::load(p)).collect()
}

fn scatter_axis_protocol(reports: &[ReportFile], requested: &Option<String>, paths: &[PathBuf]) -> Result<String> {
    let name = match requested {
        Some(n) => n.clone(),
        None => reports[0]
            .whitebox
            .keys()
            .next()
            .cloned()
            .ok_or_else(|| {
                CliError::Config(format!("{}: report has no whitebox protocols", paths[0].display()))
            })?,
    };
    for (report, path) in reports.iter().zip(paths) {
        if !report.whitebox.contains_key(&name) {
            return Err(CliError::Config(format!(
                "{}: missing protocol {} needed for the robustness axis",
                path.display(),
                name
            )));
        }
    }
    Ok(name)
}

/// Render one figure; the file is written atomically at the end.
pub fn render(spec: &PlotSpec) -> Result<()> {
    let svg = match spec.kind {
        PlotKind::TradeoffScatter => {
            let reports = load_reports(&spec.inputs)?;
            let protocol = scatter_axis_protocol(&reports, &spec.protocol, &spec.inputs)?;
            let xs: Vec<f64> = reports.iter().map(|r| r.whitebox[&protocol]).collect();
            let ys: Vec<f64> = reports.iter().map(|r| r.natural_acc).collect();
            let mut canvas = Canvas::new(
                xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.02,
                xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.02,
                ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.02,
                ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.02,
            );
            canvas.axes(&format!("robust accuracy ({protocol})"), "natural accuracy");
            for (report, (&x, &y)) in reports.iter().zip(xs.iter().zip(&ys)) {
                if report.mode == "iaat" {
                    canvas.diamond(x, y, PALETTE[1]);
                } else {
                    canvas.circle(x, y, PALETTE[0]);
                }
            }
            canvas.legend(&[
                ("fixed-eps run".to_string(), PALETTE[0]),
                ("adaptive run".to_string(), PALETTE[1]),
            ]);
            canvas.finish("accuracy vs robustness")
        }
        PlotKind::SweepLines => {
            let reports = load_reports(&spec.inputs)?;
            let mut x_hi: f64 = 0.0;
            for (report, path) in reports.iter().zip(&spec.inputs) {
                if report.eps_sweep.is_empty() {
                    return Err(CliError::Config(format!(
                        "{}: report has no eps_sweep data",
                        path.display()
                    )));
                }
                for p in &report.eps_sweep {
                    x_hi = x_hi.max(p.epsilon_255);
                }
            }
            let mut canvas = Canvas::new(0.0, x_hi, 0.0, 1.0);
            canvas.axes("test epsilon (/255)", "robust accuracy");
            let mut legend = Vec::new();
            for (i, report) in reports.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let pts: Vec<(f64, f64)> =
                    report.eps_sweep.iter().map(|p| (p.epsilon_255, p.robust_acc)).collect();
                canvas.polyline(&pts, color, report.mode == "iaat");
                legend.push((report.run_name.clone(), color));
            }
            canvas.legend(&legend);
            canvas.finish("robustness over test radii")
        }
        PlotKind::EpsEvolution => {
            let mut canvas_data = Vec::new();
            let mut y_hi: f64 = 0.0;
            let mut x_hi: f64 = 1.0;
            for path in &spec.inputs {
                let history = read_memory_csv(path)?;
                let n = history[0].len();
                let stats = epsilon_statistics(&history, 0.0, 1.0, 16)?;
                let means: Vec<f64> = stats.per_epoch_mean.iter().map(|m| m / E255).collect();
                x_hi = x_hi.max(history.len() as f64);
                for &m in &means {
                    y_hi = y_hi.max(m);
                }
                // Three fixed sample trajectories for texture.
                let mut traces = Vec::new();
                for &idx in [0usize, n / 2, n.saturating_sub(1)].iter() {
                    let t: Vec<f64> = history.iter().map(|snap| snap[idx] / E255).collect();
                    for &v in &t {
                        y_hi = y_hi.max(v);
                    }
                    traces.push(t);
                }
                canvas_data.push((path.clone(), means, traces));
            }
            let mut canvas = Canvas::new(1.0, x_hi, 0.0, y_hi * 1.05);
            canvas.axes("epoch", "epsilon (/255)");
            let mut legend = Vec::new();
            for (i, (path, means, traces)) in canvas_data.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let pts: Vec<(f64, f64)> =
                    means.iter().enumerate().map(|(e, &m)| ((e + 1) as f64, m)).collect();
                canvas.polyline(&pts, color, false);
                if canvas_data.len() == 1 {
                    for trace in traces {
                        let tp: Vec<(f64, f64)> =
                            trace.iter().enumerate().map(|(e, &m)| ((e + 1) as f64, m)).collect();
                        canvas.polyline(&tp, PALETTE[5], true);
                    }
                }
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("input {i}"));
                legend.push((format!("{name} (mean)"), color));
            }
            canvas.legend(&legend);
            canvas.finish("epsilon evolution over training")
        }
        PlotKind::EpsHistogram => {
            if spec.inputs.len() != 1 {
                return Err(CliError::Config(
                    "eps_histogram takes exactly one memory CSV".into(),
                ));
            }
            let history = read_memory_csv(&spec.inputs[0])?;
            let hi = history
                .iter()
                .flat_map(|s| s.iter())
                .cloned()
                .fold(0.0f64, f64::max)
                .max(1e-6);
            let first = epsilon_statistics(&history[..1], 0.0, hi * 1.0001, 24)?;
            let last = epsilon_statistics(&history, 0.0, hi * 1.0001, 24)?;
            let max_count = last
                .histogram
                .iter()
                .chain(first.histogram.iter())
                .map(|b| b.count)
                .max()
                .unwrap_or(1) as f64;
            let mut canvas = Canvas::new(0.0, hi / E255, 0.0, max_count * 1.05);
            canvas.axes("epsilon (/255)", "samples");
            for bin in &last.histogram {
                if bin.count > 0 {
                    canvas.bar(bin.lo / E255, bin.hi / E255, bin.count as f64, PALETTE[1], true);
                }
            }
            for bin in &first.histogram {
                if bin.count > 0 {
                    canvas.bar(bin.lo / E255, bin.hi / E255, bin.count as f64, PALETTE[0], false);
                }
            }
            canvas.legend(&[
                ("first epoch (outline)".to_string(), PALETTE[0]),
                ("final epoch (filled)".to_string(), PALETTE[1]),
            ]);
            canvas.finish("epsilon histogram")
        }
    };
    std::fs::write(&spec.output, svg).map_err(|e| CliError::io(&spec.output, e))
}

/// Write the lowest- and highest-radius samples as a gallery CSV
/// (`sample_index,epsilon_255,label`), sorted by radius. `percentile`
/// selects that share from each end; 100 lists every sample.
pub fn extreme_epsilon_gallery(
    memory: &[f64],
    labels: &[usize],
    percentile: f64,
    path: &Path,
) -> Result<()> {
    if memory.len() != labels.len() {
        return Err(CliError::Config(format!(
            "memory has {} entries but dataset has {} labels",
            memory.len(),
            labels.len()
        )));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(CliError::Config("percentile must be in [0, 100]".into()));
    }
    let mut order: Vec<usize> = (0..memory.len()).collect();
    order.sort_by(|&a, &b| {
        memory[a]
            .partial_cmp(&memory[b])
            .expect("finite radii")
            .then(a.cmp(&b))
    });
    let k = ((percentile / 100.0) * memory.len() as f64).ceil() as usize;
    let mut keep: Vec<usize> = Vec::new();
    keep.extend(order.iter().take(k));
    for &i in order.iter().rev().take(k) {
        if !keep.contains(&i) {
            keep.push(i);
        }
    }
    keep.sort_by(|&a, &b| {
        memory[a]
            .partial_cmp(&memory[b])
            .expect("finite radii")
            .then(a.cmp(&b))
    });
    let mut out = String::from("sample_index,epsilon_255,label\n");
    for i in keep {
        out.push_str(&format!("{},{},{}\n", i, memory[i] / E255, labels[i]));
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}
