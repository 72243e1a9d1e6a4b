//! Mesh file formats.
//!
//! Native text:
//! ```text
//! dim nv ne
//! x y [z]          (nv lines)
//! i0 i1 i2 [i3]    (ne lines, zero-based)
//! ```
//! Blank lines and lines starting with `#` are ignored.
//!
//! Gmsh MSH 2.2 ASCII: `$Nodes` and `$Elements` sections are read; element
//! types 1 (line), 2 (triangle), 4 (tetrahedron) and 15 (point) are accepted
//! and only the top-dimensional simplices are kept. Other sections are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Mesh, Point};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    GmshMshV2,
    NativeText,
}

impl MeshFormat {
    /// `.msh` → Gmsh, anything else → native text.
    pub fn from_path(path: &Path) -> MeshFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("msh") => MeshFormat::GmshMshV2,
            _ => MeshFormat::NativeText,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmsh-msh-v2" | "gmsh" | "msh" => Ok(MeshFormat::GmshMshV2),
            "native-text" | "native" | "txt" => Ok(MeshFormat::NativeText),
            other => Err(Error::Config(format!("unknown mesh format `{other}`"))),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::NativeText => parse_native(&text, path),
        MeshFormat::GmshMshV2 => parse_gmsh_v2(&text, path),
    }
}

struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
    skip_comments: bool,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path, skip_comments: bool) -> Self {
        Lines {
            path: path.to_path_buf(),
            inner: text.lines().enumerate().peekable(),
            last_line: 0,
            skip_comments,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Next non-empty line as (1-based line number, trimmed text).
    fn next_line(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            self.last_line = i + 1;
            let t = raw.trim();
            if t.is_empty() || (self.skip_comments && t.starts_with('#')) {
                continue;
            }
            return Ok((i + 1, t));
        }
        Err(self.err(self.last_line + 1, format!("unexpected end of file, expected {expecting}")))
    }

    fn parse_fields<T: FromStr>(&self, line: usize, text: &str, count: usize, what: &str) -> Result<Vec<T>> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < count {
            return Err(self.err(line, format!("expected {count} fields for {what}, found {}", fields.len())));
        }
        fields[..count]
            .iter()
            .map(|f| f.parse::<T>().map_err(|_| self.err(line, format!("invalid {what} field `{f}`"))))
            .collect()
    }
}

pub fn parse_native(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = Lines::new(text, path, true);
    let (ln, header) = lines.next_line("header `dim nv ne`")?;
    let h: Vec<usize> = lines.parse_fields(ln, header, 3, "header")?;
    let (dim, nv, ne) = (h[0], h[1], h[2]);
    if dim != 2 && dim != 3 {
        return Err(lines.err(ln, format!("unsupported dimension {dim}")));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, t) = lines.next_line("vertex coordinates")?;
        let c: Vec<f64> = lines.parse_fields(ln, t, dim, "coordinate")?;
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&c);
        vertices.push(p);
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, t) = lines.next_line("element connectivity")?;
        let idx: Vec<usize> = lines.parse_fields(ln, t, dim + 1, "vertex index")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(lines.err(ln, format!("vertex index {bad} out of range ({nv} vertices)")));
        }
        elements.push(idx);
    }
    Mesh::new(dim, vertices, &elements)
}

pub fn write_native(mesh: &Mesh) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", dim, mesh.num_vertices(), mesh.num_elements());
    for p in mesh.vertices() {
        let coords: Vec<String> = p[..dim].iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", coords.join(" "));
    }
    for el in mesh.elements() {
        let idx: Vec<String> = el.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{}", idx.join(" "));
    }
    out
}

pub fn parse_gmsh_v2(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = Lines::new(text, path, false);
    let mut nodes: Option<(Vec<usize>, Vec<Point>)> = None;
    let mut triangles: Vec<Vec<usize>> = Vec::new();
    let mut tets: Vec<Vec<usize>> = Vec::new();
    let mut seen_format = false;

    loop {
        let (ln, t) = match lines.next_line("section") {
            Ok(v) => v,
            Err(e) => {
                if nodes.is_some() && (!triangles.is_empty() || !tets.is_empty()) {
                    break;
                }
                return Err(e);
            }
        };
        match t {
            "$MeshFormat" => {
                let (ln, t) = lines.next_line("format line")?;
                let f: Vec<String> = lines.parse_fields(ln, t, 3, "format")?;
                if !f[0].starts_with('2') {
                    return Err(lines.err(ln, format!("unsupported MSH version {}", f[0])));
                }
                if f[1] != "0" {
                    return Err(lines.err(ln, "binary MSH files are not supported"));
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                seen_format = true;
            }
            "$Nodes" => {
                let (ln, t) = lines.next_line("node count")?;
                let n: usize = lines.parse_fields(ln, t, 1, "node count")?[0];
                let mut tags = Vec::with_capacity(n);
                let mut pts = Vec::with_capacity(n);
                for _ in 0..n {
                    let (ln, t) = lines.next_line("node")?;
                    let tag: usize = lines.parse_fields(ln, t, 1, "node tag")?[0];
                    let rest: Vec<&str> = t.split_whitespace().skip(1).collect();
                    let c: Vec<f64> = lines.parse_fields(ln, &rest.join(" "), 3, "coordinate")?;
                    tags.push(tag);
                    pts.push([c[0], c[1], c[2]]);
                }
                expect_end(&mut lines, "$EndNodes")?;
                nodes = Some((tags, pts));
            }
            "$Elements" => {
                let (ln, t) = lines.next_line("element count")?;
                let n: usize = lines.parse_fields(ln, t, 1, "element count")?[0];
                for _ in 0..n {
                    let (ln, t) = lines.next_line("element")?;
                    let f: Vec<usize> = t
                        .split_whitespace()
                        .map(|s| s.parse::<usize>().map_err(|_| lines.err(ln, format!("invalid element field `{s}`"))))
                        .collect::<Result<_>>()?;
                    if f.len() < 3 {
                        return Err(lines.err(ln, "truncated element line"));
                    }
                    let (ty, ntags) = (f[1], f[2]);
                    let nn = match ty {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        other => return Err(lines.err(ln, format!("unsupported element type {other}"))),
                    };
                    if f.len() != 3 + ntags + nn {
                        return Err(lines.err(ln, format!("element type {ty} expects {nn} nodes")));
                    }
                    let conn = f[3 + ntags..].to_vec();
                    match ty {
                        2 => triangles.push(conn),
                        4 => tets.push(conn),
                        _ => {}
                    }
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, t) = lines.next_line(&end)?;
                    if t == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(ln, format!("unexpected line `{other}`"))),
        }
        if lines.inner.peek().is_none() {
            break;
        }
    }

    if !seen_format {
        return Err(lines.err(1, "missing $MeshFormat section"));
    }
    let (tags, pts) = nodes.ok_or_else(|| lines.err(lines.last_line, "missing $Nodes section"))?;
    let (dim, cells) = if !tets.is_empty() { (3, tets) } else { (2, triangles) };
    if cells.is_empty() {
        return Err(lines.err(lines.last_line, "no triangle or tetrahedron elements"));
    }
    let by_tag: HashMap<usize, usize> = tags.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    // keep only nodes referenced by the cells, in file order
    let mut used = vec![false; pts.len()];
    for c in &cells {
        for t in c {
            let i = *by_tag
                .get(t)
                .ok_or_else(|| lines.err(lines.last_line, format!("element references unknown node {t}")))?;
            used[i] = true;
        }
    }
    let mut new_index = vec![usize::MAX; pts.len()];
    let mut vertices = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if used[i] {
            new_index[i] = vertices.len();
            let mut q = *p;
            if dim == 2 {
                q[2] = 0.0;
            }
            vertices.push(q);
        }
    }
    let elements: Vec<Vec<usize>> = cells
        .iter()
        .map(|c| c.iter().map(|t| new_index[by_tag[t]]).collect())
        .collect();
    Mesh::new(dim, vertices, &elements)
}

fn expect_end(lines: &mut Lines<'_>, end: &str) -> Result<()> {
    let (ln, t) = lines.next_line(end)?;
    if t != end {
        return Err(lines.err(ln, format!("expected {end}, found `{t}`")));
    }
    Ok(())
}
