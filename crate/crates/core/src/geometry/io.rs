//! ASCII triangle format: `v x y z` and `f i j k` lines (1-based), `#` comments.

use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, TriMesh};

pub fn load_mesh(path: impl AsRef<Path>, scale: f64) -> Result<TriMesh, GeometryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_mesh(&text, scale)
}

pub fn parse_mesh(text: &str, scale: f64) -> Result<TriMesh, GeometryError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GeometryError::BadDims(format!("scale {scale}")));
    }
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let tag = tok.next().unwrap_or("");
        let rest: Vec<&str> = tok.collect();
        let err = |message: &str| GeometryError::Parse {
            line: n + 1,
            message: message.to_string(),
        };
        match tag {
            "v" => {
                if rest.len() != 3 {
                    return Err(err("vertex needs 3 coordinates"));
                }
                let mut c = [0.0; 3];
                for (k, s) in rest.iter().enumerate() {
                    c[k] = s.parse::<f64>().map_err(|_| err("bad coordinate"))?;
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                vertices.push(Point3::new(c[0] * scale, c[1] * scale, c[2] * scale));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(err("face needs 3 indices"));
                }
                let mut f = [0u32; 3];
                for (k, s) in rest.iter().enumerate() {
                    // tolerate `i/t/n` references exported by common tools
                    let head = s.split('/').next().unwrap_or("");
                    let i: u32 = head.parse().map_err(|_| err("bad index"))?;
                    if i == 0 {
                        return Err(err("indices are 1-based"));
                    }
                    f[k] = i - 1;
                }
                faces.push(f);
            }
            _ => return Err(err(&format!("unknown record `{tag}`"))),
        }
    }
    TriMesh::new(vertices, faces)
}

/// Writes a mesh in the same format `load_mesh` reads.
pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "# unit cube
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn unit_cube_loads() {
        let m = parse_mesh(CUBE, 1.0).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        assert!(m.is_watertight());
    }

    #[test]
    fn scale_applies_to_extent() {
        let m = parse_mesh(CUBE, 0.6).unwrap();
        let e = m.aabb().extent();
        for k in 0..3 {
            assert!((e[k] - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_triangle_dropped() {
        let text = format!("{CUBE}f 1 2 1\n");
        let m = parse_mesh(&text, 1.0).unwrap();
        assert_eq!(m.triangles().len(), 12);
        assert_eq!(m.dropped_degenerate(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_mesh("v 1 2\n", 1.0), Err(GeometryError::Parse { line: 1, .. })));
        assert!(matches!(parse_mesh("v 1 2 x\n", 1.0), Err(GeometryError::Parse { .. })));
        assert!(matches!(parse_mesh("v 1 2 inf\n", 1.0), Err(GeometryError::NonFinite)));
        assert!(matches!(parse_mesh("v 0 0 0\n", 1.0), Err(GeometryError::EmptyMesh)));
        assert!(matches!(
            parse_mesh("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n", 1.0),
            Err(GeometryError::EmptyMesh)
        ));
    }

    #[test]
    fn write_then_parse() {
        let m = parse_mesh(CUBE, 1.0).unwrap();
        let back = parse_mesh(&write_mesh(&m), 1.0).unwrap();
        assert_eq!(m.vertices(), back.vertices());
        assert_eq!(m.triangles(), back.triangles());
    }
}
