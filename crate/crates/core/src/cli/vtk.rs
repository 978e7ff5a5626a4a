//! Legacy ASCII VTK unstructured grids (triangles only).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::huber::ActiveMask;
use crate::mesh::Mesh;

const VTK_TRIANGLE: u8 = 5;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: field '{name}' has length {got}, expected {expected}")]
    DimensionMismatch { path: String, name: String, expected: usize, got: usize },
    #[error("malformed VTK file at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Fields of one time level. Optional parts are omitted from the file.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotFields<'a> {
    /// Blockwise `(u₁, u₂)`, length `2n`.
    pub velocity: Option<&'a [f64]>,
    pub temperature: &'a [f64],
    /// One value per quad.
    pub pressure: Option<&'a [f64]>,
    pub active: Option<&'a ActiveMask>,
    pub g_t: Option<&'a [f64]>,
    pub mu_t: Option<&'a [f64]>,
}

fn num(s: &mut String, v: f64) {
    let _ = write!(s, "{v:.16e}");
}

fn check(path: &Path, name: &str, expected: usize, got: usize) -> Result<(), VtkError> {
    if expected == got {
        Ok(())
    } else {
        Err(VtkError::DimensionMismatch { path: path.display().to_string(), name: name.into(), expected, got })
    }
}

/// Formats the snapshot; `path` only labels errors.
pub fn format_snapshot(fields: &SnapshotFields<'_>, mesh: &Mesh, path: &Path) -> Result<String, VtkError> {
    let n = mesh.n_nodes();
    let m = mesh.n_triangles();
    check(path, "temperature", n, fields.temperature.len())?;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nbingham snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        num(&mut s, p[0]);
        s.push(' ');
        num(&mut s, p[1]);
        s.push_str(" 0\n");
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }

    let _ = writeln!(s, "POINT_DATA {n}");
    if let Some(u) = fields.velocity {
        check(path, "velocity", 2 * n, u.len())?;
        s.push_str("VECTORS velocity double\n");
        for i in 0..n {
            num(&mut s, u[i]);
            s.push(' ');
            num(&mut s, u[n + i]);
            s.push_str(" 0\n");
        }
    }
    scalars(&mut s, "temperature", fields.temperature.iter().copied());

    let mut cells: Vec<(&str, Vec<f64>)> = Vec::new();
    if let Some(p) = fields.pressure {
        check(path, "pressure", mesh.n_quads(), p.len())?;
        cells.push(("pressure", mesh.tri_quad.iter().map(|&q| p[q]).collect()));
    }
    if let Some(mask) = fields.active {
        check(path, "active", m, mask.len())?;
        cells.push(("active", mask.as_field()));
    }
    for (name, field) in [("g", fields.g_t), ("mu", fields.mu_t)] {
        if let Some(v) = field {
            check(path, name, m, v.len())?;
            cells.push((name, v.to_vec()));
        }
    }
    if !cells.is_empty() {
        let _ = writeln!(s, "CELL_DATA {m}");
        for (name, v) in cells {
            scalars(&mut s, name, v.into_iter());
        }
    }
    Ok(s)
}

fn scalars(s: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        num(s, v);
        s.push('\n');
    }
}

pub fn write_snapshot(fields: &SnapshotFields<'_>, mesh: &Mesh, path: &Path) -> Result<(), VtkError> {
    let text = format_snapshot(fields, mesh, path)?;
    std::fs::write(path, text).map_err(|e| VtkError::Io { path: path.display().to_string(), source: e })
}

/// Contents of a legacy file as written by [`write_snapshot`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    /// Scalars have one entry per point, vectors three.
    pub point_data: BTreeMap<String, Vec<f64>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
}

fn malformed(line: usize, message: &str) -> VtkError {
    VtkError::Malformed { line, message: message.into() }
}

fn read_values<'t>(
    lines: &mut impl Iterator<Item = (usize, &'t str)>,
    k: usize,
    start: usize,
) -> Result<Vec<f64>, VtkError> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let (ln, l) = lines.next().ok_or_else(|| malformed(start, "truncated data"))?;
        for w in l.split_whitespace() {
            out.push(w.parse::<f64>().map_err(|_| malformed(ln, "bad number"))?);
        }
    }
    Ok(out)
}

pub fn read_vtk(text: &str) -> Result<VtkData, VtkError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut data = VtkData::default();

    // header, title, format, dataset
    for expect in ["# vtk", "", "ASCII", "DATASET UNSTRUCTURED_GRID"] {
        let (ln, l) = lines.next().ok_or_else(|| malformed(0, "truncated header"))?;
        if !l.starts_with(expect) {
            return Err(malformed(ln, "unexpected header line"));
        }
    }
    let mut section: Option<(bool, usize)> = None;
    while let Some((ln, l)) = lines.next() {
        let words: Vec<&str> = l.split_whitespace().collect();
        let count =
            |i: usize| words.get(i).and_then(|w| w.parse::<usize>().ok()).ok_or_else(|| malformed(ln, "bad count"));
        match words[0] {
            "POINTS" => {
                let v = read_values(&mut lines, 3 * count(1)?, ln)?;
                data.points = v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            }
            "CELLS" => {
                for _ in 0..count(1)? {
                    let (ln2, l2) = lines.next().ok_or_else(|| malformed(ln, "truncated cells"))?;
                    let ids: Vec<usize> = l2
                        .split_whitespace()
                        .map(|w| w.parse().map_err(|_| malformed(ln2, "bad index")))
                        .collect::<Result<_, _>>()?;
                    if ids.is_empty() || ids[0] + 1 != ids.len() {
                        return Err(malformed(ln2, "cell size does not match its index count"));
                    }
                    data.cells.push(ids[1..].to_vec());
                }
            }
            "CELL_TYPES" => {
                for _ in 0..count(1)? {
                    let (ln2, l2) = lines.next().ok_or_else(|| malformed(ln, "truncated cell types"))?;
                    data.cell_types.push(l2.parse().map_err(|_| malformed(ln2, "bad cell type"))?);
                }
            }
            "POINT_DATA" => section = Some((true, count(1)?)),
            "CELL_DATA" => section = Some((false, count(1)?)),
            "SCALARS" | "VECTORS" => {
                let (is_point, k) = section.ok_or_else(|| malformed(ln, "data before POINT_DATA/CELL_DATA"))?;
                let name = words.get(1).ok_or_else(|| malformed(ln, "missing name"))?.to_string();
                let width = if words[0] == "VECTORS" { 3 } else { 1 };
                if width == 1 {
                    let (ln2, l2) = lines.next().ok_or_else(|| malformed(ln, "missing lookup table"))?;
                    if !l2.starts_with("LOOKUP_TABLE") {
                        return Err(malformed(ln2, "expected LOOKUP_TABLE"));
                    }
                }
                let v = read_values(&mut lines, width * k, ln)?;
                if is_point {
                    data.point_data.insert(name, v);
                } else {
                    data.cell_data.insert(name, v);
                }
            }
            _ => return Err(malformed(ln, "unknown section")),
        }
    }
    Ok(data)
}
