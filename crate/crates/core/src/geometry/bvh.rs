//! Binary BVH over triangle bounds, median split on centroids.

use nalgebra::{Point3, Vector3};

use super::mesh::Ray;

pub const MAX_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow_point(p);
        }
        b
    }

    pub fn grow_point(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Slab test; returns the entry distance when the ray overlaps `[0, t_max]`.
    fn hit(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let mut a = (self.min[k] - origin[k]) * inv_dir[k];
            let mut b = (self.max[k] - origin[k]) * inv_dir[k];
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN arises for a zero direction component with the origin on a slab plane;
            // treat it as overlapping on that axis.
            if a.is_nan() || b.is_nan() {
                continue;
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(prim_bounds: &[Aabb]) -> Self {
        let centroids: Vec<Point3<f64>> = prim_bounds.iter().map(Aabb::center).collect();
        let mut order: Vec<usize> = (0..prim_bounds.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build_node(&mut nodes, &mut order, 0, prim_bounds, &centroids);
        }
        Self { nodes, order }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_leaf_len(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { len, .. } => Some(*len),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Visits candidate primitives front to back and keeps the lexicographically smallest
    /// `(t, id)` reported by `test`. `test` receives the current best distance.
    pub fn traverse<F>(&self, ray: &Ray, mut test: F) -> Option<(usize, f64)>
    where
        F: FnMut(usize, f64) -> Option<f64>,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let d = ray.direction.into_inner();
        let inv = Vector3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best: Option<(usize, f64)> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let best_t = best.map_or(f64::INFINITY, |b| b.1);
            let node = &self.nodes[ni];
            if node.bounds().hit(&ray.origin, &inv, best_t).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &id in &self.order[start..start + len] {
                        let cur = best.map_or(f64::INFINITY, |b| b.1);
                        if let Some(t) = test(id, cur) {
                            let better = match best {
                                None => true,
                                Some((bid, bt)) => t < bt || (t == bt && id < bid),
                            };
                            if better {
                                best = Some((id, t));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let tl = self.nodes[left].bounds().hit(&ray.origin, &inv, best_t);
                    let tr = self.nodes[right].bounds().hit(&ray.origin, &inv, best_t);
                    // push the farther child first so the nearer one is popped next
                    match (tl, tr) {
                        (Some(a), Some(b)) if a <= b => {
                            stack.push(right);
                            stack.push(left);
                        }
                        (Some(_), Some(_)) => {
                            stack.push(left);
                            stack.push(right);
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    offset: usize,
    prim_bounds: &[Aabb],
    centroids: &[Point3<f64>],
) -> usize {
    let bounds = order
        .iter()
        .fold(Aabb::empty(), |acc, &i| acc.union(&prim_bounds[i]));
    let index = nodes.len();
    if order.len() <= MAX_LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start: offset,
            len: order.len(),
        });
        return index;
    }
    let cbounds = Aabb::from_points(order.iter().map(|&i| &centroids[i]));
    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    // ties on the centroid coordinate fall back to primitive id so the split is deterministic
    order.sort_by(|&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        len: 0,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, prim_bounds, centroids);
    let right = build_node(nodes, hi, offset + mid, prim_bounds, centroids);
    nodes[index] = Node::Inner {
        bounds,
        left,
        right,
    };
    index
}
