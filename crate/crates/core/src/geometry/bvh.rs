//! Bounding volume hierarchy over world-space triangles.
//!
//! Every instance's triangles are transformed into world space once at build
//! time; the structure is read-only afterwards and can be shared freely
//! between rendering threads. Hits are the nearest intersection with
//! `t > HIT_EPSILON`; exact ties go to the lowest primitive id, so the result
//! never depends on traversal order.

use super::{Aabb, Pose, Ray, TriMesh, Vec3};

/// Minimum accepted ray parameter, meters.
pub const HIT_EPSILON: f64 = 1e-6;

const LEAF_SIZE: usize = 4;

/// A triangle already placed in world space, with precomputed edges.
#[derive(Debug, Clone)]
pub struct WorldTriangle {
    pub v0: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// Unit geometric normal `e1 x e2` (zero for degenerate triangles).
    pub normal: Vec3,
    pub instance_id: u32,
    /// Index of the triangle within its source mesh.
    pub triangle_id: u32,
    pub material: u32,
}

impl WorldTriangle {
    fn new(a: Vec3, b: Vec3, c: Vec3, instance_id: u32, triangle_id: u32, material: u32) -> Self {
        let e1 = b - a;
        let e2 = c - a;
        let n = e1.cross(&e2);
        let len = n.norm();
        Self {
            v0: a,
            e1,
            e2,
            normal: if len > 0.0 { n / len } else { Vec3::zeros() },
            instance_id,
            triangle_id,
            material,
        }
    }

    pub fn vertices(&self) -> [Vec3; 3] {
        [self.v0, self.v0 + self.e1, self.v0 + self.e2]
    }

    fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices())
    }
}

/// A ray/scene intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub instance_id: u32,
    pub triangle_id: u32,
    /// Global primitive index inside the [`Bvh`]; instances are laid out in
    /// build order, triangles in mesh order.
    pub primitive: u32,
    /// Barycentric weights of the second and third vertex.
    pub barycentric: (f64, f64),
    /// Unit geometric normal, not flipped towards the ray.
    pub normal: Vec3,
    pub material: usize,
}

/// Slack on the barycentric range so rays through a shared edge cannot
/// slip between the two triangles on round-off.
const EDGE_EPSILON: f64 = 1e-10;

/// Möller–Trumbore ray/triangle test. Returns `(t, b1, b2)` for hits with
/// `t > HIT_EPSILON`; both faces are intersected.
#[inline]
pub fn intersect_triangle(tri: &WorldTriangle, ray: &Ray) -> Option<(f64, f64, f64)> {
    let p = ray.direction.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri.v0;
    let b1 = s.dot(&p) * inv;
    if !(-EDGE_EPSILON..=1.0 + EDGE_EPSILON).contains(&b1) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let b2 = ray.direction.dot(&q) * inv;
    if b2 < -EDGE_EPSILON || b1 + b2 > 1.0 + EDGE_EPSILON {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > HIT_EPSILON && t.is_finite()).then_some((t, b1, b2))
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first entry in `order`. Interior: index of the left child; the
    /// right child follows the whole left subtree and is stored in `right`.
    start: u32,
    count: u32,
    right: u32,
}

/// Read-only acceleration structure for nearest-hit and occlusion queries.
#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    triangles: Vec<WorldTriangle>,
}

impl Bvh {
    /// Builds over `(mesh, pose, instance_id, material)` items.
    pub fn build<'a>(items: impl IntoIterator<Item = (&'a TriMesh, &'a Pose, u32, usize)>) -> Self {
        let mut triangles = Vec::new();
        for (mesh, pose, instance_id, material) in items {
            let world = mesh.transformed_vertices(pose);
            for (ti, t) in mesh.triangles().iter().enumerate() {
                triangles.push(WorldTriangle::new(
                    world[t[0] as usize],
                    world[t[1] as usize],
                    world[t[2] as usize],
                    instance_id,
                    ti as u32,
                    material as u32,
                ));
            }
        }
        Self::from_triangles(triangles)
    }

    pub fn from_triangles(triangles: Vec<WorldTriangle>) -> Self {
        let mut bvh = Self {
            nodes: Vec::new(),
            order: (0..triangles.len() as u32).collect(),
            triangles,
        };
        if !bvh.triangles.is_empty() {
            let bounds: Vec<Aabb> = bvh.triangles.iter().map(WorldTriangle::bounds).collect();
            let centroids: Vec<Vec3> = bounds.iter().map(Aabb::center).collect();
            let n = bvh.order.len();
            bvh.build_node(&bounds, &centroids, 0, n);
        }
        bvh
    }

    fn build_node(&mut self, bounds: &[Aabb], centroids: &[Vec3], start: usize, end: usize) -> u32 {
        let mut node_bounds = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &p in &self.order[start..end] {
            node_bounds = node_bounds.union(&bounds[p as usize]);
            centroid_bounds.grow(&centroids[p as usize]);
        }
        // Padding keeps grazing hits that the triangle test accepts from
        // being culled by round-off in the slab test.
        let pad = Vec3::repeat(1e-9 * (1.0 + node_bounds.extent().amax()));
        node_bounds.min -= pad;
        node_bounds.max += pad;

        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            bounds: node_bounds,
            start: start as u32,
            count: (end - start) as u32,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            return index;
        }
        let extent = centroid_bounds.extent();
        let axis = extent.imax();
        if extent[axis] <= 0.0 {
            return index;
        }
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(bounds, centroids, start, mid);
        let right = self.build_node(bounds, centroids, mid, end);
        debug_assert_eq!(left, index + 1);
        let node = &mut self.nodes[index as usize];
        node.count = 0;
        node.start = left;
        node.right = right;
        index
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// All triangles, indexed by primitive id.
    pub fn triangles(&self) -> &[WorldTriangle] {
        &self.triangles
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Nearest hit along `ray`.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(f64, u32, f64, f64)> = None;
        self.traverse(ray, f64::INFINITY, |prim, t, b1, b2, best_t| {
            let better = match best {
                None => true,
                Some((bt, bp, _, _)) => t < bt || (t == bt && prim < bp),
            };
            if better {
                best = Some((t, prim, b1, b2));
                *best_t = t;
            }
            false
        });
        best.map(|(t, prim, b1, b2)| {
            let tri = &self.triangles[prim as usize];
            Hit {
                t,
                instance_id: tri.instance_id,
                triangle_id: tri.triangle_id,
                primitive: prim,
                barycentric: (b1, b2),
                normal: tri.normal,
                material: tri.material as usize,
            }
        })
    }

    /// True when anything is hit with `HIT_EPSILON < t < t_max`.
    pub fn occluded(&self, ray: &Ray, t_max: f64) -> bool {
        let mut hit = false;
        self.traverse(ray, t_max, |_, t, _, _, _| {
            if t < t_max {
                hit = true;
            }
            hit
        });
        hit
    }

    /// Visits candidate triangle hits. `on_hit(prim, t, b1, b2, &mut cull_t)`
    /// may lower the culling distance and returns `true` to stop early.
    fn traverse(
        &self,
        ray: &Ray,
        t_max: f64,
        mut on_hit: impl FnMut(u32, f64, f64, f64, &mut f64) -> bool,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut cull = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut current = 0u32;
        loop {
            let node = &self.nodes[current as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for &prim in &self.order[s..s + node.count as usize] {
                    if let Some((t, b1, b2)) = intersect_triangle(&self.triangles[prim as usize], ray) {
                        if t <= cull && on_hit(prim, t, b1, b2, &mut cull) {
                            return;
                        }
                    }
                }
            } else {
                let (l, r) = (node.start, node.right);
                let tl = slab(&self.nodes[l as usize].bounds, ray, &inv, cull);
                let tr = slab(&self.nodes[r as usize].bounds, ray, &inv, cull);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (l, r) } else { (r, l) };
                        stack[sp] = far;
                        sp += 1;
                        current = near;
                        continue;
                    }
                    (Some(_), None) => {
                        current = l;
                        continue;
                    }
                    (None, Some(_)) => {
                        current = r;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            // Re-test popped nodes against the (possibly tightened) cull distance.
            loop {
                if sp == 0 {
                    return;
                }
                sp -= 1;
                let n = stack[sp];
                if slab(&self.nodes[n as usize].bounds, ray, &inv, cull).is_some() {
                    current = n;
                    break;
                }
            }
        }
    }
}

/// Entry distance of the ray into `b`, if it enters before `t_max`.
#[inline]
fn slab(b: &Aabb, ray: &Ray, inv: &Vec3, t_max: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for a in 0..3 {
        let near = (b.min[a] - ray.origin[a]) * inv[a];
        let far = (b.max[a] - ray.origin[a]) * inv[a];
        let (near, far) = if near <= far { (near, far) } else { (far, near) };
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t0 <= t1).then_some(t0)
}
