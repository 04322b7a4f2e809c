use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bsp::BspTree;
use super::polygon::{Polygon, PLANE_EPSILON};
use super::repair::polygons_to_mesh;
use crate::exec::{self, Parallelism};
use crate::geometry::{validate_mesh, Box3, Mesh};
use crate::{Error, Result};

/// Knobs for the boolean engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BooleanOptions {
    /// Seed for the jitter applied on retry.
    pub seed: u64,
    /// Total attempts, the first unperturbed.
    pub max_attempts: u32,
    pub parallelism: Parallelism,
}

impl Default for BooleanOptions {
    fn default() -> Self {
        BooleanOptions {
            seed: 0x5eed_c56,
            max_attempts: 6,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// Rigid jitter magnitude per retry, in meters.
const JITTER: f64 = 20.0 * PLANE_EPSILON;

/// Solid as a closed polygon soup plus its bounds.
#[derive(Debug, Clone, Default)]
pub(crate) struct Solid {
    pub polygons: Vec<Polygon>,
    pub bounds: Box3,
}

impl Solid {
    pub fn new(polygons: Vec<Polygon>) -> Solid {
        let bounds = polygons
            .iter()
            .fold(Box3::empty(), |b, p| b.union(&p.bounds()));
        Solid { polygons, bounds }
    }

    pub fn from_mesh(mesh: &Mesh, offset: Vector3<f64>) -> Solid {
        let polygons = mesh
            .triangles
            .iter()
            .filter_map(|t| {
                let [a, b, c] = t.map(|i| mesh.vertices[i as usize] + offset);
                Polygon::from_triangle(a, b, c)
            })
            .collect();
        Solid::new(polygons)
    }

    fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }
}

fn flip_all(mut polys: Vec<Polygon>) -> Vec<Polygon> {
    polys.iter_mut().for_each(Polygon::flip);
    polys
}

fn split_near(polys: Vec<Polygon>, other: &Box3) -> (Vec<Polygon>, Vec<Polygon>) {
    let margin = 4.0 * PLANE_EPSILON;
    polys
        .into_iter()
        .partition(|p| p.bounds().intersects(other, margin))
}

fn overlaps(a: &Solid, b: &Solid) -> bool {
    a.bounds.intersects(&b.bounds, 4.0 * PLANE_EPSILON)
}

pub(crate) fn union(a: Solid, b: Solid, par: Parallelism) -> Solid {
    if a.is_empty() {
        return b;
    }
    if b.is_empty() || !overlaps(&a, &b) {
        return concat(a, b);
    }
    let (ta, tb) = exec::join(
        par,
        || BspTree::build(a.polygons.clone()),
        || BspTree::build(b.polygons.clone()),
    );
    let (a_near, mut a_far) = split_near(a.polygons, &b.bounds);
    let (b_near, mut b_far) = split_near(b.polygons, &a.bounds);
    let mut a_kept = tb.clip_polygons(a_near);
    let b_kept = ta.clip_polygons(b_near);
    let mut b_kept = flip_all(ta.clip_polygons(flip_all(b_kept)));
    a_far.append(&mut a_kept);
    a_far.append(&mut b_far);
    a_far.append(&mut b_kept);
    Solid::new(a_far)
}

pub(crate) fn subtract(a: Solid, b: Solid, par: Parallelism) -> Solid {
    if a.is_empty() || b.is_empty() || !overlaps(&a, &b) {
        return a;
    }
    let (mut ta, tb) = exec::join(
        par,
        || BspTree::build(a.polygons.clone()),
        || BspTree::build(b.polygons.clone()),
    );
    ta.invert();
    let (a_near, mut a_far) = split_near(a.polygons, &b.bounds);
    let (b_near, _) = split_near(b.polygons, &a.bounds);
    let a_kept = flip_all(tb.clip_polygons(flip_all(a_near)));
    let b_inside = ta.clip_polygons(b_near);
    let b_kept = ta.clip_polygons(flip_all(b_inside));
    a_far.extend(a_kept);
    a_far.extend(b_kept);
    Solid::new(a_far)
}

fn concat(mut a: Solid, b: Solid) -> Solid {
    a.polygons.extend(b.polygons);
    a.bounds = a.bounds.union(&b.bounds);
    a
}

/// Balanced pairwise union; the pairing depends only on input order.
pub(crate) fn union_all(mut solids: Vec<Solid>, par: Parallelism) -> Solid {
    match solids.len() {
        0 => Solid::default(),
        1 => solids.pop().unwrap_or_default(),
        n => {
            let right = solids.split_off(n / 2);
            let (l, r) = exec::join(par, || union_all(solids, par), || union_all(right, par));
            union(l, r, par)
        }
    }
}

/// Group solids into clusters whose bounding boxes overlap transitively.
fn clusters(solids: &[Solid]) -> Vec<Vec<usize>> {
    let n = solids.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if overlaps(&solids[i], &solids[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Union of `solids` minus union of `holes` as a polygon soup.
fn combine_solids(solids: Vec<Solid>, holes: Vec<Solid>, par: Parallelism) -> Vec<Polygon> {
    let groups = clusters(&solids);
    let mut slots: Vec<Option<Solid>> = solids.into_iter().map(Some).collect();
    let grouped: Vec<Vec<Solid>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| slots[i].take().unwrap_or_default()).collect())
        .collect();
    let pieces = exec::map(par, &grouped, |members| {
        let u = union_all(members.clone(), par);
        let cutters: Vec<Solid> = holes.iter().filter(|h| overlaps(&u, h)).cloned().collect();
        if cutters.is_empty() {
            return u.polygons;
        }
        subtract(u, union_all(cutters, par), par).polygons
    });
    pieces.into_iter().flatten().collect()
}

fn jitter(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-JITTER..JITTER),
        rng.gen_range(-JITTER..JITTER),
        rng.gen_range(-JITTER..JITTER),
    )
}

/// Union of `solids` minus union of `holes`, as a watertight mesh. Retries
/// with seeded rigid jitter of the operands when the raw result does not
/// close up.
pub fn boolean_mesh(solids: &[&Mesh], holes: &[&Mesh], opts: &BooleanOptions) -> Result<Mesh> {
    for (i, m) in solids.iter().chain(holes).enumerate() {
        let r = validate_mesh(m);
        if !r.watertight {
            return Err(Error::Validity(format!("boolean operand {i} is not watertight ({r})")));
        }
    }
    if solids.is_empty() {
        return Ok(Mesh::empty());
    }
    let mut last = String::new();
    for attempt in 0..opts.max_attempts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut offsets = |count: usize| -> Vec<Vector3<f64>> {
            (0..count)
                .map(|_| if attempt == 0 { Vector3::zeros() } else { jitter(&mut rng) })
                .collect()
        };
        let solid_offsets = offsets(solids.len());
        let hole_offsets = offsets(holes.len());
        let s: Vec<Solid> = solids
            .iter()
            .zip(&solid_offsets)
            .map(|(m, o)| Solid::from_mesh(m, *o))
            .collect();
        let h: Vec<Solid> = holes
            .iter()
            .zip(&hole_offsets)
            .map(|(m, o)| Solid::from_mesh(m, *o))
            .collect();
        let polygons = combine_solids(s, h, opts.parallelism);
        let mesh = polygons_to_mesh(&polygons);
        let report = validate_mesh(&mesh);
        if report.watertight {
            return Ok(mesh);
        }
        last = report.to_string();
    }
    Err(Error::Robustness {
        attempts: opts.max_attempts.max(1),
        reason: last,
    })
}

/// Point set `a ∪ b`.
pub fn csg_union(a: &Mesh, b: &Mesh) -> Result<Mesh> {
    csg_union_with(a, b, &BooleanOptions::default())
}

pub fn csg_union_with(a: &Mesh, b: &Mesh, opts: &BooleanOptions) -> Result<Mesh> {
    boolean_mesh(&[a, b], &[], opts)
}

/// Point set `a \ b`; may be empty.
pub fn csg_subtract(a: &Mesh, b: &Mesh) -> Result<Mesh> {
    csg_subtract_with(a, b, &BooleanOptions::default())
}

pub fn csg_subtract_with(a: &Mesh, b: &Mesh, opts: &BooleanOptions) -> Result<Mesh> {
    boolean_mesh(&[a], &[b], opts)
}
