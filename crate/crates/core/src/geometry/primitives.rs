//! Procedural watertight solids centered at the origin.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, TriMesh};

pub const MIN_TESSELLATION: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box { x: f64, y: f64, z: f64 },
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    /// `length` is the straight section; total height is `length + 2·radius`.
    Capsule { radius: f64, length: f64 },
    /// L-shaped prism: arms of `length` (x) and `width` (y), `thickness` wide, extruded by `height`.
    LBlock { length: f64, width: f64, thickness: f64, height: f64 },
}

impl Primitive {
    fn dims(&self) -> Vec<f64> {
        match *self {
            Primitive::Box { x, y, z } => vec![x, y, z],
            Primitive::Cylinder { radius, height } => vec![radius, height],
            Primitive::Sphere { radius } => vec![radius],
            Primitive::Capsule { radius, length } => vec![radius, length],
            Primitive::LBlock {
                length,
                width,
                thickness,
                height,
            } => vec![length, width, thickness, height],
        }
    }

    fn is_curved(&self) -> bool {
        matches!(
            self,
            Primitive::Cylinder { .. } | Primitive::Sphere { .. } | Primitive::Capsule { .. }
        )
    }
}

pub fn make_primitive(kind: &Primitive, tessellation: u32) -> Result<TriMesh, GeometryError> {
    if kind.dims().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(GeometryError::BadDims(format!("{kind:?}")));
    }
    if kind.is_curved() && tessellation < MIN_TESSELLATION {
        return Err(GeometryError::BadDims(format!(
            "tessellation {tessellation} < {MIN_TESSELLATION}"
        )));
    }
    let (verts, tris) = match *kind {
        Primitive::Box { x, y, z } => box_mesh(x, y, z),
        Primitive::Cylinder { radius, height } => {
            let h = height / 2.0;
            revolve(&[(0.0, -h), (radius, -h), (radius, h), (0.0, h)], tessellation)
        }
        Primitive::Sphere { radius } => revolve(&sphere_profile(radius, 0.0, tessellation), tessellation),
        Primitive::Capsule { radius, length } => {
            revolve(&sphere_profile(radius, length, tessellation), tessellation)
        }
        Primitive::LBlock {
            length,
            width,
            thickness,
            height,
        } => {
            if thickness >= length.min(width) {
                return Err(GeometryError::BadDims(format!(
                    "l_block thickness {thickness} must be below both arm lengths"
                )));
            }
            l_block(length, width, thickness, height)
        }
    };
    TriMesh::new(verts, tris)
}

fn box_mesh(x: f64, y: f64, z: f64) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
    let (hx, hy, hz) = (x / 2.0, y / 2.0, z / 2.0);
    let quad = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
    extrude(&quad, &[[0, 1, 2], [0, 2, 3]], hz)
}

fn l_block(a: f64, b: f64, t: f64, h: f64) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
    let poly = [(0.0, 0.0), (a, 0.0), (a, t), (t, t), (t, b), (0.0, b)];
    let centered: Vec<(f64, f64)> = poly.iter().map(|&(x, y)| (x - a / 2.0, y - b / 2.0)).collect();
    extrude(&centered, &[[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5]], h / 2.0)
}

/// Prism over a counter-clockwise polygon with a given cap triangulation.
fn extrude(poly: &[(f64, f64)], cap: &[[u32; 3]], half_height: f64) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
    let n = poly.len() as u32;
    let mut verts: Vec<Point3<f64>> = poly
        .iter()
        .map(|&(x, y)| Point3::new(x, y, -half_height))
        .collect();
    verts.extend(poly.iter().map(|&(x, y)| Point3::new(x, y, half_height)));
    let mut tris = Vec::new();
    for t in cap {
        tris.push([t[0] + n, t[1] + n, t[2] + n]);
        tris.push([t[0], t[2], t[1]]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        tris.push([i, j, j + n]);
        tris.push([i, j + n, i + n]);
    }
    (verts, tris)
}

/// Profile for a sphere (`length == 0`) or capsule, bottom pole to top pole.
fn sphere_profile(radius: f64, length: f64, tessellation: u32) -> Vec<(f64, f64)> {
    let mut profile = vec![(0.0, -radius - length / 2.0)];
    if length == 0.0 {
        let rings = tessellation / 2;
        for k in 1..rings {
            let phi = -PI / 2.0 + PI * k as f64 / rings as f64;
            profile.push((radius * phi.cos(), radius * phi.sin()));
        }
    } else {
        let quarter = (tessellation / 4).max(2);
        let half = length / 2.0;
        for k in 1..=quarter {
            let phi = -PI / 2.0 + PI / 2.0 * k as f64 / quarter as f64;
            profile.push((radius * phi.cos(), radius * phi.sin() - half));
        }
        for k in 0..quarter {
            let phi = PI / 2.0 * k as f64 / quarter as f64;
            profile.push((radius * phi.cos(), radius * phi.sin() + half));
        }
    }
    profile.push((0.0, radius + length / 2.0));
    profile
}

/// Surface of revolution about z. First and last profile points are poles (radius 0).
fn revolve(profile: &[(f64, f64)], segments: u32) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
    let rings = &profile[1..profile.len() - 1];
    let seg = segments as usize;
    let mut verts = vec![Point3::new(0.0, 0.0, profile[0].1)];
    for &(r, z) in rings {
        for j in 0..seg {
            let th = 2.0 * PI * j as f64 / seg as f64;
            verts.push(Point3::new(r * th.cos(), r * th.sin(), z));
        }
    }
    let top = verts.len() as u32;
    verts.push(Point3::new(0.0, 0.0, profile[profile.len() - 1].1));
    let idx = |ring: usize, j: usize| (1 + ring * seg + j % seg) as u32;
    let mut tris = Vec::new();
    for j in 0..seg {
        tris.push([0, idx(0, j + 1), idx(0, j)]);
    }
    for i in 0..rings.len() - 1 {
        for j in 0..seg {
            let (a, b) = (idx(i, j), idx(i, j + 1));
            let (c, d) = (idx(i + 1, j + 1), idx(i + 1, j));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..seg {
        tris.push([idx(last, j), idx(last, j + 1), top]);
    }
    (verts, tris)
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> Result<TriMesh, GeometryError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(GeometryError::BadDims(format!("radius {radius}")));
    }
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    TriMesh::new(
        verts.into_iter().map(|v| Point3::from(v * radius)).collect(),
        tris,
    )
}
