//! Turn a boolean polygon soup into an indexed, watertight triangle mesh:
//! weld coincident vertices, split edges at T-junctions, triangulate.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::polygon::Polygon;
use crate::geometry::Mesh;

/// Vertices closer than this are merged.
pub const WELD_EPSILON: f64 = 1e-6;

struct Welder {
    cell: f64,
    grid: HashMap<[i64; 3], Vec<u32>>,
    points: Vec<Point3<f64>>,
}

impl Welder {
    fn new(cell: f64) -> Self {
        Welder {
            cell,
            grid: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Point3<f64>) -> u32 {
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in ids {
                            if (self.points[id as usize] - p).norm() <= self.cell {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.grid.entry(k).or_default().push(id);
        id
    }
}

/// Indexed polygon used during repair.
struct Face {
    ring: Vec<u32>,
    normal: Vector3<f64>,
}

pub fn polygons_to_mesh(polygons: &[Polygon]) -> Mesh {
    let mut welder = Welder::new(WELD_EPSILON);
    let mut faces: Vec<Face> = Vec::with_capacity(polygons.len());
    for poly in polygons {
        let mut ring: Vec<u32> = Vec::with_capacity(poly.vertices.len());
        for v in &poly.vertices {
            let id = welder.insert(*v);
            if ring.last() != Some(&id) {
                ring.push(id);
            }
        }
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() >= 3 {
            faces.push(Face {
                ring,
                normal: poly.plane.normal,
            });
        }
    }
    let points = welder.points;
    split_t_junctions(&mut faces, &points);

    let mut vertices = points.clone();
    let mut triangles = Vec::new();
    for face in &faces {
        triangulate(face, &mut vertices, &mut triangles);
    }
    cancel_opposite_pairs(&mut triangles);
    split_pinches(&mut vertices, &mut triangles);
    fill_cracks(&mut vertices, &mut triangles);
    Mesh::new(vertices, triangles).compacted()
}

/// Insert every vertex that lies on an unmatched edge into that edge.
fn split_t_junctions(faces: &mut [Face], points: &[Point3<f64>]) {
    // Spatial hash over vertices for segment queries.
    let bounds = crate::geometry::Box3::from_points(points);
    if bounds.is_empty() {
        return;
    }
    let extent = bounds.size().max().max(1e-9);
    let cell = (extent / (points.len() as f64).cbrt().max(1.0)).max(WELD_EPSILON * 16.0);
    let key = |p: &Point3<f64>| -> [i64; 3] {
        [
            ((p.x - bounds.min.x) / cell).floor() as i64,
            ((p.y - bounds.min.y) / cell).floor() as i64,
            ((p.z - bounds.min.z) / cell).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i as u32);
    }

    // A few passes settle chains of junctions on the same edge.
    for _ in 0..4 {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for f in faces.iter() {
            let n = f.ring.len();
            for i in 0..n {
                *directed.entry((f.ring[i], f.ring[(i + 1) % n])).or_default() += 1;
            }
        }
        let mut changed = false;
        for f in faces.iter_mut() {
            let n = f.ring.len();
            let mut new_ring = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (f.ring[i], f.ring[(i + 1) % n]);
                new_ring.push(a);
                if directed.contains_key(&(b, a)) {
                    continue;
                }
                let on_edge = vertices_on_segment(a, b, points, &grid, cell, &key);
                if !on_edge.is_empty() {
                    changed = true;
                    new_ring.extend(on_edge);
                }
            }
            f.ring = new_ring;
        }
        if !changed {
            break;
        }
    }
}

fn vertices_on_segment(
    a: u32,
    b: u32,
    points: &[Point3<f64>],
    grid: &HashMap<[i64; 3], Vec<u32>>,
    _cell: f64,
    key: &dyn Fn(&Point3<f64>) -> [i64; 3],
) -> Vec<u32> {
    let pa = points[a as usize];
    let pb = points[b as usize];
    let d = pb - pa;
    let len2 = d.norm_squared();
    if len2 <= WELD_EPSILON * WELD_EPSILON {
        return Vec::new();
    }
    let lo = key(&pa.inf(&pb));
    let hi = key(&pa.sup(&pb));
    let mut hits: Vec<(f64, u32)> = Vec::new();
    for x in lo[0] - 1..=hi[0] + 1 {
        for y in lo[1] - 1..=hi[1] + 1 {
            for z in lo[2] - 1..=hi[2] + 1 {
                let Some(ids) = grid.get(&[x, y, z]) else { continue };
                for &id in ids {
                    if id == a || id == b {
                        continue;
                    }
                    let p = points[id as usize];
                    let t = (p - pa).dot(&d) / len2;
                    if t <= 0.0 || t >= 1.0 {
                        continue;
                    }
                    let off = (pa + d * t - p).norm();
                    if off <= WELD_EPSILON {
                        hits.push((t, id));
                    }
                }
            }
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    hits.dedup_by_key(|h| h.1);
    hits.into_iter().map(|(_, id)| id).collect()
}

/// Drop zero-volume sheets: triangle pairs over the same three vertices with
/// opposite winding, left behind by slivers that welded flat.
fn cancel_opposite_pairs(triangles: &mut Vec<[u32; 3]>) {
    let canonical = |t: &[u32; 3]| -> ([u32; 3], bool) {
        let r = (0..3).min_by_key(|&i| t[i]).unwrap_or(0);
        let rot = [t[r], t[(r + 1) % 3], t[(r + 2) % 3]];
        if rot[1] < rot[2] {
            (rot, true)
        } else {
            ([rot[0], rot[2], rot[1]], false)
        }
    };
    let mut by_key: HashMap<[u32; 3], (Vec<usize>, Vec<usize>)> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        let (k, even) = canonical(t);
        let e = by_key.entry(k).or_default();
        if even {
            e.0.push(i);
        } else {
            e.1.push(i);
        }
    }
    let mut drop = vec![false; triangles.len()];
    for (even, odd) in by_key.values() {
        for (&a, &b) in even.iter().zip(odd) {
            drop[a] = true;
            drop[b] = true;
        }
    }
    let mut i = 0;
    triangles.retain(|_| {
        i += 1;
        !drop[i - 1]
    });
    triangles.retain(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
}

/// Cracks wider than this are left open for the caller to reject.
const CRACK_WIDTH: f64 = 1e-5;

/// Close thin boundary loops left where neighbouring fragments disagree on an
/// intersection point. A loop is filled only when its mean width, twice the
/// enclosed area over the perimeter, stays below `CRACK_WIDTH`.
fn fill_cracks(vertices: &mut Vec<Point3<f64>>, triangles: &mut Vec<[u32; 3]>) {
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles.iter() {
        for i in 0..3 {
            *directed.entry((t[i], t[(i + 1) % 3])).or_default() += 1;
        }
    }
    let mut next: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut open: Vec<(u32, u32)> = directed
        .keys()
        .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
        .copied()
        .collect();
    if open.is_empty() {
        return;
    }
    open.sort_unstable();
    for &(a, b) in &open {
        next.entry(a).or_default().push(b);
    }
    for &(a, b) in &open {
        let Some(outs) = next.get_mut(&a) else { continue };
        let Some(pos) = outs.iter().position(|&x| x == b) else { continue };
        outs.swap_remove(pos);
        let mut walk = vec![a];
        let mut cur = b;
        let mut closed = false;
        while walk.len() <= open.len() {
            if cur == a {
                closed = true;
                break;
            }
            walk.push(cur);
            let Some(n) = next.get_mut(&cur).and_then(|o| o.pop()) else { break };
            cur = n;
        }
        if !closed {
            continue;
        }
        for lp in simple_loops(&walk) {
            fill_thin_loop(&lp, vertices, triangles);
        }
    }
}

/// Cut a closed walk that revisits vertices into simple loops, so no fill
/// fans twice around the same vertex.
fn simple_loops(walk: &[u32]) -> Vec<Vec<u32>> {
    let mut loops = Vec::new();
    let mut stack: Vec<u32> = Vec::with_capacity(walk.len());
    for &v in walk {
        if let Some(k) = stack.iter().position(|&x| x == v) {
            loops.push(stack.split_off(k));
        }
        stack.push(v);
    }
    loops.push(stack);
    loops.retain(|l| l.len() >= 3);
    loops
}

fn fill_thin_loop(lp: &[u32], vertices: &mut Vec<Point3<f64>>, triangles: &mut Vec<[u32; 3]>) {
    let pts: Vec<Point3<f64>> = lp.iter().map(|&i| vertices[i as usize]).collect();
    let perimeter: f64 = (0..pts.len()).map(|i| (pts[(i + 1) % pts.len()] - pts[i]).norm()).sum();
    let area: Vector3<f64> = (0..pts.len())
        .map(|i| pts[i].coords.cross(&pts[(i + 1) % pts.len()].coords))
        .sum::<Vector3<f64>>()
        * 0.5;
    if perimeter <= 0.0 || 2.0 * area.norm() / perimeter > CRACK_WIDTH {
        return;
    }
    // The fill runs against the boundary edges so each one gains its twin.
    let c = vertices.len() as u32;
    let centroid = pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / pts.len() as f64;
    vertices.push(Point3::from(centroid));
    for i in 0..lp.len() {
        triangles.push([c, lp[(i + 1) % lp.len()], lp[i]]);
    }
}

/// Separate sheets that touch along an edge. Around each such edge the
/// incident triangles are paired with their angular neighbour on the material
/// side, then every vertex is duplicated once per connected fan of corners.
fn split_pinches(vertices: &mut Vec<Point3<f64>>, triangles: &mut [[u32; 3]]) {
    let mut edges: HashMap<(u32, u32), Vec<(usize, bool)>> = HashMap::new();
    for (ti, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            edges.entry(key).or_default().push((ti, a < b));
        }
    }
    if edges.values().all(|inc| inc.len() <= 2) {
        return;
    }

    let mut parent: Vec<usize> = (0..triangles.len() * 3).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let corner = |t: &[u32; 3], ti: usize, v: u32| ti * 3 + t.iter().position(|&x| x == v).unwrap_or(0);
    let link = |parent: &mut Vec<usize>, t1: usize, t2: usize, a: u32, b: u32| {
        for v in [a, b] {
            let (c1, c2) = (corner(&triangles[t1], t1, v), corner(&triangles[t2], t2, v));
            let (r1, r2) = (find(parent, c1), find(parent, c2));
            if r1 != r2 {
                parent[r1.max(r2)] = r1.min(r2);
            }
        }
    };

    let mut keys: Vec<(u32, u32)> = edges.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let inc = &edges[&(a, b)];
        if inc.len() == 2 {
            if inc[0].1 != inc[1].1 {
                link(&mut parent, inc[0].0, inc[1].0, a, b);
            }
            continue;
        }
        let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
        let e = (pb - pa).normalize();
        let u = if e.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = (u - e * e.dot(&u)).normalize();
        let w = e.cross(&u);
        let mut around: Vec<(f64, usize, bool)> = inc
            .iter()
            .map(|&(ti, fwd)| {
                let t = triangles[ti];
                let c = t.iter().copied().find(|&x| x != a && x != b).unwrap_or(a);
                let d = vertices[c as usize] - pa;
                (d.dot(&w).atan2(d.dot(&u)), ti, fwd)
            })
            .collect();
        around.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let n = around.len();
        // `fwd` triangles hold a->b and enclose material at decreasing angle.
        for i in 0..n {
            let (_, ti, fwd) = around[i];
            if !fwd {
                continue;
            }
            let (_, tj, other) = around[(i + n - 1) % n];
            if !other {
                link(&mut parent, ti, tj, a, b);
            }
        }
    }

    let mut copies: HashMap<usize, u32> = HashMap::new();
    let mut seen: HashMap<u32, usize> = HashMap::new();
    for ti in 0..triangles.len() {
        for k in 0..3 {
            let v = triangles[ti][k];
            let root = find(&mut parent, ti * 3 + k);
            let id = match copies.get(&root) {
                Some(&id) => id,
                None => {
                    let id = if seen.contains_key(&v) {
                        vertices.push(vertices[v as usize]);
                        (vertices.len() - 1) as u32
                    } else {
                        v
                    };
                    seen.insert(v, root);
                    copies.insert(root, id);
                    id
                }
            };
            triangles[ti][k] = id;
        }
    }
}

/// Fan from the first vertex when the ring is strictly convex; otherwise fan
/// from an inserted centroid so collinear runs never form zero-area triangles.
fn triangulate(face: &Face, vertices: &mut Vec<Point3<f64>>, out: &mut Vec<[u32; 3]>) {
    let ring = &face.ring;
    let n = ring.len();
    if n == 3 {
        out.push([ring[0], ring[1], ring[2]]);
        return;
    }
    let p = |i: usize| vertices[ring[i % n] as usize];
    let strictly_convex = (0..n).all(|i| {
        let e0 = p(i + 1) - p(i);
        let e1 = p(i + 2) - p(i + 1);
        let cross = e0.cross(&e1).dot(&face.normal);
        cross > 1e-9 * e0.norm() * e1.norm()
    });
    if strictly_convex {
        for i in 1..n - 1 {
            out.push([ring[0], ring[i], ring[i + 1]]);
        }
        return;
    }
    let centroid = Point3::from(ring.iter().map(|&i| vertices[i as usize].coords).sum::<Vector3<f64>>() / n as f64);
    let c = vertices.len() as u32;
    vertices.push(centroid);
    for i in 0..n {
        out.push([c, ring[i], ring[(i + 1) % n]]);
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_eight_walk_splits_at_the_repeated_vertex() {
        // 0 -> 1 -> 2 -> 1 -> 3 closes back on 0 through vertex 1 twice.
        let loops = simple_loops(&[0, 1, 4, 2, 1, 3]);
        assert_eq!(loops, vec![vec![1, 4, 2], vec![0, 1, 3]]);
    }

    #[test]
    fn figure_eight_crack_fills_without_a_shared_fan_edge() {
        // Two slivers meeting at one vertex, each bounded by an open loop.
        let p = |x: f64, y: f64| Point3::new(x, y, 0.0);
        let mut vertices = vec![p(0.0, 0.0), p(1e-3, 1e-7), p(2e-3, 0.0), p(1e-3, -1e-7), p(-1e-3, 1e-7), p(-1e-3, -1e-7)];
        // Only the boundary matters to the fill; seed it with one-sided strips.
        let mut triangles = vec![[0, 1, 2], [2, 3, 0], [0, 4, 5]];
        let before = triangles.len();
        fill_cracks(&mut vertices, &mut triangles);
        assert!(triangles.len() > before);
        let mut uses: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &triangles[before..] {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let fan_edges_at_0 = uses.iter().filter(|(&(a, b), _)| (a == 0 && b >= 6) || (b == 0 && a >= 6));
        assert!(fan_edges_at_0.clone().all(|(_, &n)| n <= 2), "{uses:?}");
    }
}
