//! Field output (legacy VTK), probe traces (CSV) and the SVG report.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::basis::{q1_values, Q2_NODES};
use crate::error::{Error, Result};
use crate::mesh::FluidMesh;
use crate::solid::SolidMesh;
use crate::stepper::StepReport;

/// Sub-quads of a Q2 cell in local node numbering.
const SUB_QUADS: [[usize; 4]; 4] = [[0, 4, 8, 7], [4, 1, 5, 8], [8, 5, 2, 6], [7, 8, 6, 3]];

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Pressure at every velocity node from the Q1 field of the cells.
pub fn pressure_at_velocity_nodes(fm: &FluidMesh, pressure: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; fm.num_velocity_nodes()];
    for cell in &fm.cells {
        for (a, &n) in cell.nodes.iter().enumerate() {
            let [xi, eta] = Q2_NODES[a];
            let psi = q1_values(xi as f64, eta as f64);
            out[n] = cell.pnodes.iter().zip(psi).map(|(&p, w)| w * pressure[p]).sum();
        }
    }
    out
}

/// Fluid fields as a legacy ASCII unstructured grid; each Q2 cell becomes
/// four bilinear quads over its nine nodes.
pub fn write_fluid_vtk(path: &Path, fm: &FluidMesh, velocity: &[[f64; 2]], pressure: &[f64]) -> Result<()> {
    if velocity.len() != fm.num_velocity_nodes() || pressure.len() != fm.num_pressure_nodes() {
        return Err(Error::Dimension {
            what: "fluid fields for output".into(),
            expected: fm.num_velocity_nodes(),
            got: velocity.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0\nfluid\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", fm.vnodes.len())?;
    for x in &fm.vnodes {
        writeln!(w, "{:e} {:e} 0", x[0], x[1])?;
    }
    let nq = 4 * fm.cells.len();
    writeln!(w, "CELLS {} {}", nq, 5 * nq)?;
    for c in &fm.cells {
        for q in SUB_QUADS {
            writeln!(w, "4 {} {} {} {}", c.nodes[q[0]], c.nodes[q[1]], c.nodes[q[2]], c.nodes[q[3]])?;
        }
    }
    writeln!(w, "CELL_TYPES {nq}")?;
    for _ in 0..nq {
        writeln!(w, "9")?;
    }
    writeln!(w, "POINT_DATA {}", fm.vnodes.len())?;
    writeln!(w, "VECTORS velocity double")?;
    for u in velocity {
        writeln!(w, "{:e} {:e} 0", u[0], u[1])?;
    }
    writeln!(w, "SCALARS pressure double 1\nLOOKUP_TABLE default")?;
    for p in pressure_at_velocity_nodes(fm, pressure) {
        writeln!(w, "{p:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Solid mesh with velocity and displacement per node and stress per
/// triangle.
pub fn write_solid_vtk(path: &Path, sm: &SolidMesh, velocity: &[[f64; 2]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0\nsolid\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", sm.num_nodes())?;
    for x in &sm.coords {
        writeln!(w, "{:e} {:e} 0", x[0], x[1])?;
    }
    let nt = sm.num_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in &sm.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", sm.num_nodes())?;
    writeln!(w, "VECTORS velocity double")?;
    for n in 0..sm.num_nodes() {
        let u = velocity.get(n).copied().unwrap_or([0.0; 2]);
        writeln!(w, "{:e} {:e} 0", u[0], u[1])?;
    }
    writeln!(w, "VECTORS displacement double")?;
    for (x, x0) in sm.coords.iter().zip(&sm.reference) {
        writeln!(w, "{:e} {:e} 0", x[0] - x0[0], x[1] - x0[1])?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    for (name, i, j) in [("stress_xx", 0, 0), ("stress_xy", 0, 1), ("stress_yy", 1, 1)] {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for s in &sm.stress {
            writeln!(w, "{:e}", s[i][j])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Appends probe rows `step,time,values...` under a header.
pub struct ProbeWriter {
    inner: csv::Writer<File>,
    width: usize,
}

impl ProbeWriter {
    pub fn create(path: &Path, columns: &[String]) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(format_err)?;
        let mut header = vec!["step".to_string(), "time".to_string()];
        header.extend(columns.iter().cloned());
        inner.write_record(&header).map_err(format_err)?;
        Ok(Self { inner, width: columns.len() })
    }

    pub fn push(&mut self, step: u64, time: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.width {
            return Err(Error::Dimension { what: "probe row".into(), expected: self.width, got: values.len() });
        }
        let mut row = vec![step.to_string(), format!("{time:e}")];
        row.extend(values.iter().map(|v| format!("{v:e}")));
        self.inner.write_record(&row).map_err(format_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// One CSV row per time step with the step diagnostics.
pub struct StepWriter {
    inner: csv::Writer<File>,
}

impl StepWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self { inner: csv::Writer::from_path(path).map_err(format_err)? })
    }

    pub fn push(&mut self, r: &StepReport) -> Result<()> {
        self.inner.serialize(r).map_err(format_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Column-wise probe trace read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTable {
    pub columns: Vec<String>,
    pub time: Vec<f64>,
    /// `values[c][row]`
    pub values: Vec<Vec<f64>>,
}

impl ProbeTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(format_err)?;
        let header: Vec<String> = r.headers().map_err(format_err)?.iter().map(String::from).collect();
        if header.len() < 2 || header[1] != "time" {
            return Err(Error::Format(format!("{} is not a probe trace", path.display())));
        }
        let columns = header[2..].to_vec();
        let mut time = Vec::new();
        let mut values = vec![Vec::new(); columns.len()];
        for rec in r.records() {
            let rec = rec.map_err(format_err)?;
            let parse = |s: &str| s.parse::<f64>().map_err(format_err);
            time.push(parse(&rec[1])?);
            for (c, col) in values.iter_mut().enumerate() {
                col.push(parse(&rec[c + 2])?);
            }
        }
        Ok(Self { columns, time, values })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.values[i].as_slice())
    }
}

/// Amplitude (half peak-to-peak) and frequency of a periodic trace,
/// measured over full cycles after `t_from`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillation {
    pub amplitude: f64,
    pub frequency: f64,
    pub cycles: usize,
}

pub fn oscillation(time: &[f64], values: &[f64], t_from: f64) -> Option<Oscillation> {
    let (t, v): (Vec<f64>, Vec<f64>) =
        time.iter().zip(values).filter(|(t, _)| **t >= t_from).map(|(t, v)| (*t, *v)).unzip();
    if t.len() < 4 {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    // upward mean crossings, linearly interpolated
    let mut ups = Vec::new();
    for i in 1..v.len() {
        let (a, b) = (v[i - 1] - mean, v[i] - mean);
        if a < 0.0 && b >= 0.0 {
            ups.push(t[i - 1] + (t[i] - t[i - 1]) * (-a) / (b - a));
        }
    }
    if ups.len() < 2 {
        return None;
    }
    let cycles = ups.len() - 1;
    let period = (ups[cycles] - ups[0]) / cycles as f64;
    let mut amp = 0.0;
    for k in 0..cycles {
        let seg = t.iter().zip(&v).filter(|(tt, _)| **tt >= ups[k] && **tt <= ups[k + 1]).map(|(_, x)| *x);
        let (lo, hi) = seg.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
        amp += 0.5 * (hi - lo);
    }
    Some(Oscillation { amplitude: amp / cycles as f64, frequency: 1.0 / period, cycles })
}

/// Single-series line plot.
pub fn svg_plot(title: &str, x: &[f64], y: &[f64]) -> String {
    let (w, h, m) = (640.0, 360.0, 50.0);
    let finite: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| (*a, *b)).collect();
    let (x0, x1) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
    let (mut y0, mut y1) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |v: f64| m + (v - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for (v, yy) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{:.4e}</text>"#, m - 4.0, yy + 4.0, v);
    }
    for (v, xx) in [(x0, m), (x1, w - m)] {
        let _ = writeln!(s, r#"<text x="{xx}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{:.4}</text>"#, h - m + 14.0, v);
    }
    let pts: Vec<String> = finite.iter().map(|(a, b)| format!("{:.2},{:.2}", sx(*a), sy(*b))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes one SVG per probe column of every probe trace (`*.csv` with
/// `step,time,...` numeric columns) in `dir` plus a `summary.md` table;
/// returns the files written.
pub fn write_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    csvs.sort();
    if csvs.is_empty() {
        return Err(Error::Config(format!("no probe CSV files in {}", dir.display())));
    }
    let mut out = Vec::new();
    let mut summary = String::from("| file | column | final | min | max | amplitude | frequency |\n|---|---|---|---|---|---|---|\n");
    for csv in &csvs {
        let table = match ProbeTable::read(csv) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping {}: {e}", csv.display());
                continue;
            }
        };
        let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("probes").to_string();
        for (c, name) in table.columns.iter().enumerate() {
            let y = &table.values[c];
            let path = dir.join(format!("{stem}_{name}.svg"));
            fs::write(&path, svg_plot(&format!("{stem}: {name}"), &table.time, y))?;
            out.push(path);
            let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            let t_half = table.time.last().copied().unwrap_or(0.0) * 0.5;
            let osc = oscillation(&table.time, y, t_half);
            let _ = writeln!(
                summary,
                "| {stem} | {name} | {:.6e} | {lo:.6e} | {hi:.6e} | {} | {} |",
                y.last().copied().unwrap_or(f64::NAN),
                osc.map_or("-".into(), |o| format!("{:.4e}", o.amplitude)),
                osc.map_or("-".into(), |o| format!("{:.4}", o.frequency)),
            );
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no readable probe traces in {}", dir.display())));
    }
    let path = dir.join("summary.md");
    fs::write(&path, summary)?;
    out.push(path);
    Ok(out)
}
