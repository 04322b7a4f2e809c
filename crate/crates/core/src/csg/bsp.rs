//! Arena-backed BSP tree used as a point classifier for mesh booleans.

use super::polygon::{Plane, Polygon};

#[derive(Debug, Clone)]
struct Node {
    plane: Plane,
    front: Option<usize>,
    back: Option<usize>,
}

/// BSP tree over a closed polygon set. Only the partition is kept; the
/// polygons used to build it are consumed.
#[derive(Debug, Clone, Default)]
pub struct BspTree {
    nodes: Vec<Node>,
}

impl BspTree {
    pub fn build(polygons: Vec<Polygon>) -> BspTree {
        let mut tree = BspTree { nodes: Vec::new() };
        if polygons.is_empty() {
            return tree;
        }
        // (parent slot to patch, polygons); the root has no parent
        let mut stack: Vec<(Option<(usize, bool)>, Vec<Polygon>)> = vec![(None, polygons)];
        while let Some((parent, polys)) = stack.pop() {
            let plane = choose_plane(&polys);
            let idx = tree.nodes.len();
            tree.nodes.push(Node {
                plane,
                front: None,
                back: None,
            });
            if let Some((p, is_front)) = parent {
                if is_front {
                    tree.nodes[p].front = Some(idx);
                } else {
                    tree.nodes[p].back = Some(idx);
                }
            }
            let (mut cf, mut cb, mut front, mut back) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for poly in polys {
                poly.split(&plane, &mut cf, &mut cb, &mut front, &mut back);
            }
            if !front.is_empty() {
                stack.push((Some((idx, true)), front));
            }
            if !back.is_empty() {
                stack.push((Some((idx, false)), back));
            }
        }
        tree
    }

    /// Swap inside and outside.
    pub fn invert(&mut self) {
        for n in &mut self.nodes {
            n.plane = n.plane.flipped();
            std::mem::swap(&mut n.front, &mut n.back);
        }
    }

    /// Remove the parts of `polygons` inside the solid. Polygons coplanar
    /// with a boundary and facing the same way are kept; opposite-facing
    /// coplanar polygons are removed.
    pub fn clip_polygons(&self, polygons: Vec<Polygon>) -> Vec<Polygon> {
        if self.nodes.is_empty() {
            return polygons;
        }
        let mut out = Vec::with_capacity(polygons.len());
        let mut stack = vec![(0usize, polygons)];
        while let Some((idx, polys)) = stack.pop() {
            let node = &self.nodes[idx];
            let (mut front, mut back) = (Vec::new(), Vec::new());
            for poly in polys {
                let (mut cf, mut cb) = (Vec::new(), Vec::new());
                poly.split(&node.plane, &mut cf, &mut cb, &mut front, &mut back);
                front.append(&mut cf);
                back.append(&mut cb);
            }
            match node.front {
                Some(c) if !front.is_empty() => stack.push((c, front)),
                _ => out.append(&mut front),
            }
            if let Some(c) = node.back {
                if !back.is_empty() {
                    stack.push((c, back));
                }
            }
        }
        out
    }
}

/// Pick a splitting plane among a few candidates, preferring the one that
/// splits the fewest polygons.
fn choose_plane(polys: &[Polygon]) -> Plane {
    const CANDIDATES: usize = 5;
    if polys.len() <= 2 {
        return polys[0].plane;
    }
    let step = (polys.len() / CANDIDATES).max(1);
    let mut best = polys[0].plane;
    let mut best_score = usize::MAX;
    for cand in polys.iter().step_by(step).take(CANDIDATES) {
        let plane = cand.plane;
        let mut splits = 0usize;
        let (mut nf, mut nb) = (0usize, 0usize);
        for p in polys {
            let mut f = false;
            let mut b = false;
            for v in &p.vertices {
                let d = plane.distance(v);
                f |= d > super::polygon::PLANE_EPSILON;
                b |= d < -super::polygon::PLANE_EPSILON;
            }
            match (f, b) {
                (true, true) => splits += 1,
                (true, false) => nf += 1,
                (false, true) => nb += 1,
                _ => {}
            }
        }
        let score = splits * 8 + nf.abs_diff(nb);
        if score < best_score {
            best_score = score;
            best = plane;
        }
    }
    best
}
