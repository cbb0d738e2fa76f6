//! Object corpus: a manifest of named primitives or mesh files.
//!
//! ```text
//! # id     shape     dimensions (m) or path
//! cube     box       0.05 0.05 0.05
//! can      cylinder  0.033 0.10
//! ball     sphere    0.035
//! pill     capsule   0.02 0.06
//! ell      l_block   0.07 0.05 0.02 0.04
//! part     mesh      meshes/part.mesh
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use tactigrasp_core::geometry::{load_mesh, make_primitive, Primitive, TriMesh};

use crate::error::CliError;

/// Desk-scale stand-ins. Most are heavy enough at the default density that the
/// 2 N closing force only sometimes holds them, so labels are mixed; `cube_50` and
/// `can` nearly always succeed and `anvil` should fail the success screen.
pub const BUILTIN: &str = "\
cube_50     box       0.05 0.05 0.05
can         cylinder  0.033 0.10
jug         box       0.08 0.08 0.26
brick       box       0.07 0.07 0.33
bottle      cylinder  0.042 0.37
plank       box       0.12 0.04 0.30
ball        sphere    0.058
ell         l_block   0.22 0.07 0.04 0.16
drum        cylinder  0.06 0.13
anvil       box       0.09 0.09 0.50
";

fn parse_line(fields: &[&str], line: usize, tessellation: u32, base: &Path) -> Result<TriMesh, CliError> {
    let bad = |m: String| CliError::Data(format!("corpus line {line}: {m}"));
    let dims: Vec<f64> = if fields[1] == "mesh" {
        Vec::new()
    } else {
        fields[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}"))))
            .collect::<Result<_, _>>()?
    };
    let want = |n: usize| -> Result<(), CliError> {
        if dims.len() == n { Ok(()) } else { Err(bad(format!("{} takes {n} dimensions, got {}", fields[1], dims.len()))) }
    };
    let kind = match fields[1] {
        "box" => want(3).map(|_| Primitive::Box { x: dims[0], y: dims[1], z: dims[2] })?,
        "cylinder" => want(2).map(|_| Primitive::Cylinder { radius: dims[0], height: dims[1] })?,
        "sphere" => want(1).map(|_| Primitive::Sphere { radius: dims[0] })?,
        "capsule" => want(2).map(|_| Primitive::Capsule { radius: dims[0], length: dims[1] })?,
        "l_block" => want(4).map(|_| Primitive::LBlock { length: dims[0], width: dims[1], thickness: dims[2], height: dims[3] })?,
        "mesh" => {
            if fields.len() != 3 {
                return Err(bad("mesh takes one path".into()));
            }
            return load_mesh(base.join(fields[2]), 1.0).map_err(|e| bad(e.to_string()));
        }
        other => return Err(bad(format!("unknown shape `{other}`"))),
    };
    make_primitive(&kind, tessellation).map_err(|e| bad(e.to_string()))
}

/// Parses a manifest; mesh paths resolve against `base`.
pub fn parse_corpus(text: &str, tessellation: u32, base: &Path) -> Result<Vec<(String, TriMesh)>, CliError> {
    let mut ids = BTreeSet::new();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(CliError::Data(format!("corpus line {}: expected `id shape ...`", n + 1)));
        }
        if fields[0].contains(',') || !ids.insert(fields[0].to_string()) {
            return Err(CliError::Data(format!("corpus line {}: invalid or duplicate id `{}`", n + 1, fields[0])));
        }
        let mesh = parse_line(&fields, n + 1, tessellation, base)?;
        if !mesh.is_watertight() {
            return Err(CliError::Data(format!("corpus object `{}` is not watertight", fields[0])));
        }
        out.push((fields[0].to_string(), mesh));
    }
    if out.is_empty() {
        return Err(CliError::Data("corpus is empty".into()));
    }
    Ok(out)
}

pub fn load_corpus(path: Option<&Path>, tessellation: u32) -> Result<Vec<(String, TriMesh)>, CliError> {
    match path {
        None => parse_corpus(BUILTIN, tessellation, Path::new(".")),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("cannot read corpus {}: {e}", p.display())))?;
            parse_corpus(&text, tessellation, p.parent().unwrap_or(Path::new(".")))
        }
    }
}
