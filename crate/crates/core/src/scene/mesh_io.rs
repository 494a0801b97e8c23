//! Minimal ASCII mesh format.
//!
//! ```text
//! # comments and blank lines are ignored
//! nodes 4
//! 0 0 0
//! 1 0 0
//! 0 1 0
//! 0 0 1
//! tets 1
//! 0 1 2 3
//! ```
//!
//! Coordinates are metres, indices are 0-based. A `triangles N` section may
//! replace or accompany `tets` for surface meshes used as colliders.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::SceneError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AsciiMesh {
    pub nodes: Vec<Vector3<f64>>,
    pub tets: Vec<[usize; 4]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn read_mesh(path: &Path) -> Result<AsciiMesh, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    parse_mesh(&text).map_err(|(line, message)| SceneError::Mesh { path: path.to_path_buf(), line, message })
}

enum Section {
    None,
    Nodes(usize),
    Tets(usize),
    Triangles(usize),
}

/// Parses mesh text; errors carry the 1-based line number.
pub fn parse_mesh(text: &str) -> Result<AsciiMesh, (usize, String)> {
    let mut mesh = AsciiMesh::default();
    let mut section = Section::None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let header = |count: &str| count.parse::<usize>().map_err(|_| (line_no, format!("bad section count `{count}`")));
        match (&mut section, fields.as_slice()) {
            (Section::None, ["nodes", n]) => section = Section::Nodes(header(n)?),
            (Section::None, ["tets", n]) => section = Section::Tets(header(n)?),
            (Section::None, ["triangles", n]) => section = Section::Triangles(header(n)?),
            (Section::None, _) => return Err((line_no, format!("expected `nodes`, `tets` or `triangles` header, found `{line}`"))),
            (Section::Nodes(left), _) => {
                mesh.nodes.push(Vector3::from(numbers::<f64, 3>(&fields, line_no)?));
                *left -= 1;
            }
            (Section::Tets(left), _) => {
                mesh.tets.push(numbers::<usize, 4>(&fields, line_no)?);
                *left -= 1;
            }
            (Section::Triangles(left), _) => {
                mesh.triangles.push(numbers::<usize, 3>(&fields, line_no)?);
                *left -= 1;
            }
        }
        if matches!(section, Section::Nodes(0) | Section::Tets(0) | Section::Triangles(0)) {
            section = Section::None;
        }
    }
    if !matches!(section, Section::None) {
        return Err((last_line, "file ends inside a section".into()));
    }
    let n = mesh.nodes.len();
    if n == 0 {
        return Err((last_line, "mesh has no nodes".into()));
    }
    if let Some(bad) = mesh.tets.iter().flatten().chain(mesh.triangles.iter().flatten()).find(|&&i| i >= n) {
        return Err((last_line, format!("element references node {bad}, mesh has {n}")));
    }
    Ok(mesh)
}

fn numbers<T: std::str::FromStr + Copy + Default, const N: usize>(fields: &[&str], line: usize) -> Result<[T; N], (usize, String)> {
    if fields.len() != N {
        return Err((line, format!("expected {N} values, found {}", fields.len())));
    }
    let mut out = [T::default(); N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse().map_err(|_| (line, format!("cannot parse `{f}`")))?;
    }
    Ok(out)
}

/// Writes `mesh` in the format accepted by [`parse_mesh`]; values round-trip exactly.
pub fn format_mesh(mesh: &AsciiMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    if !mesh.tets.is_empty() {
        let _ = writeln!(out, "tets {}", mesh.tets.len());
        for t in &mesh.tets {
            let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
    }
    if !mesh.triangles.is_empty() {
        let _ = writeln!(out, "triangles {}", mesh.triangles.len());
        for t in &mesh.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
    }
    out
}
