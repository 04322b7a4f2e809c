//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Each check measures against an oracle that lives here, independent of
//! the code under test: the voxel membership oracle or closed-form volumes
//! for geometry, lattice arithmetic for snapping, a minimal STL reader for
//! export, and a hand-written transition table for the print protocol.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Arc;
use std::time::{Duration, Instant};

use deskcad_cli::app;
use deskcad_cli::fabclient::FabBackend;
use deskcad_cli::kernel::Kernel;
use deskcad_core::csg::{
    combine, voxel_oracle_volume_with, BooleanOptions, CombineInput, CsgTree, ShapeModel, Solidity,
};
use deskcad_core::fabrication::{export_meshes, StlDocument, StlFormat};
use deskcad_core::geometry::{Point3, UnitQuaternion, Vector3};
use deskcad_core::manipulation::{manipulation_box, DragSession, Handle, SnapMode};
use deskcad_core::scene::{load_document, save_document, SceneDocument, SelectionMode, WorkspaceGrid};
use deskcad_core::script::{Command, IdRef, Session};
use deskcad_core::{
    make_primitive, mesh_volume, transform_mesh, validate_mesh, Axis, Error, Mesh, Parallelism, PrimitiveKind,
    TessellationSpec, Transform,
};
use deskcad_fab::{spawn, Faults, ManualClock, MockNetwork, ServerConfig, ServerHandle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

// Tolerances and budgets.
const VOLUME_REL: f64 = 0.02;
const ORACLE_RESOLUTION: usize = 128;
const CSG_SCENES: usize = 200;
const CSG_BUDGET: Duration = Duration::from_secs(300);
const BOWL_BUDGET: Duration = Duration::from_secs(5);
const FAB_BUDGET: Duration = Duration::from_secs(30);
const LATTICE_TOL: f64 = 1e-9;
const ANCHOR_TOL: f64 = 1e-9;
const STL_VOLUME_REL: f64 = 1e-6;
const SNAP_DRAGS: usize = 1000;
const FUZZ_COMMANDS: usize = 1000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn faceted() -> ShapeModel {
    ShapeModel::Faceted(TessellationSpec::default())
}

fn oracle(trees: &[CsgTree], model: &ShapeModel) -> f64 {
    voxel_oracle_volume_with(trees, ORACLE_RESOLUTION, model, Parallelism::Parallel).expect("oracle runs")
}

/// Construction tree of a scene object, in world space.
fn world_tree(scene: &SceneDocument, id: u64) -> CsgTree {
    let o = scene.object(id).unwrap();
    CsgTree::Placed { transform: o.transform, child: Box::new(o.geometry.clone()) }
}

fn run(s: &mut Session, cmd: Command) -> deskcad_core::script::Outcome {
    s.execute(&cmd).unwrap_or_else(|e| panic!("{cmd:?}: {e}"))
}

fn table_session() -> Session {
    let mut s = Session::new(SceneDocument::default());
    run(&mut s, Command::Workspace { label: "table".into(), spacing: None, offset: None });
    s
}

// ---------------------------------------------------------------- CSG suite

type Part = (PrimitiveKind, Transform, Solidity);

fn random_part(rng: &mut ChaCha8Rng, first: bool) -> Part {
    let kind = PrimitiveKind::ALL[rng.gen_range(0..PrimitiveKind::ALL.len())];
    let solidity = if first || rng.gen_bool(0.6) { Solidity::Solid } else { Solidity::Hole };
    let t = Transform::new(
        Vector3::new(rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04)),
        UnitQuaternion::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI / 2.0..PI / 2.0), rng.gen_range(-PI..PI)),
        Vector3::new(rng.gen_range(0.02..0.1), rng.gen_range(0.02..0.1), rng.gen_range(0.02..0.1)),
    );
    (kind, t, solidity)
}

/// Solids minus holes, with every leaf solid so the oracle reads the
/// membership straight from the tree shape.
fn oracle_tree(parts: &[Part]) -> CsgTree {
    let leaves = |s: Solidity| -> Vec<CsgTree> {
        parts
            .iter()
            .filter(|p| p.2 == s)
            .map(|(k, t, _)| CsgTree::Leaf { kind: *k, transform: *t, solidity: Solidity::Solid })
            .collect()
    };
    let solid = CsgTree::Union { children: leaves(Solidity::Solid) };
    let holes = leaves(Solidity::Hole);
    if holes.is_empty() {
        solid
    } else {
        CsgTree::Difference { solid: Box::new(solid), hole: Box::new(CsgTree::Union { children: holes }) }
    }
}

fn csg_oracle_suite() -> Outcome {
    let tess = TessellationSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let start = Instant::now();
    let (mut worst, mut failures) = (0.0f64, Vec::new());
    for i in 0..CSG_SCENES {
        let n = rng.gen_range(1..=8);
        let parts: Vec<Part> = (0..n).map(|j| random_part(&mut rng, j == 0)).collect();
        let identity = Transform::identity();
        let geometry: Vec<CsgTree> =
            parts.iter().map(|(k, _, s)| CsgTree::Leaf { kind: *k, transform: identity, solidity: *s }).collect();
        let meshes: Vec<Mesh> =
            parts.iter().map(|(k, t, _)| transform_mesh(&make_primitive(*k, &tess).unwrap(), t)).collect();
        let inputs: Vec<CombineInput> = parts
            .iter()
            .enumerate()
            .map(|(j, (_, t, s))| CombineInput {
                mesh: &meshes[j],
                geometry: &geometry[j],
                transform: t,
                solidity: *s,
                color: [0, 0, 0],
                sequence: j as u64,
            })
            .collect();
        let expected = oracle(&[oracle_tree(&parts)], &ShapeModel::Faceted(tess));
        match combine(&inputs, &BooleanOptions::default()) {
            Ok(out) => {
                let report = validate_mesh(&out.mesh);
                if !report.watertight {
                    failures.push(format!("scene {i}: {report}"));
                    continue;
                }
                let e = rel(mesh_volume(&out.mesh).unwrap(), expected);
                worst = worst.max(e);
                if e > VOLUME_REL {
                    failures.push(format!("scene {i}: volume off by {:.2}%", 100.0 * e));
                }
            }
            // Holes may legitimately swallow everything.
            Err(Error::EmptyResult) if expected == 0.0 => {}
            Err(e) => failures.push(format!("scene {i}: {e}")),
        }
    }
    let took = start.elapsed();
    ensure(failures.is_empty(), || format!("{} of {CSG_SCENES} failed: {}", failures.len(), failures.join("; ")))?;
    ensure(took <= CSG_BUDGET, || format!("took {took:.1?}, budget {CSG_BUDGET:?}"))?;
    Ok(format!("{CSG_SCENES} scenes watertight, worst volume error {:.3}%, {took:.1?}", 100.0 * worst))
}

// ------------------------------------------------------ cube with a corner bite

fn corner_bite() -> Outcome {
    let mut s = table_session();
    let edge: f64 = 0.1;
    let r: f64 = 0.05;
    run(&mut s, Command::Create { kind: PrimitiveKind::Cube });
    run(&mut s, Command::Create { kind: PrimitiveKind::Sphere });
    // Both spawn 10 cm across on the same center; push the sphere's center
    // onto the cube's (+x, +y, +z) corner.
    run(&mut s, Command::Move { delta: [edge / 2.0; 3], snap: false });
    run(&mut s, Command::Hole { ids: None });
    run(&mut s, Command::SelectAll);
    run(&mut s, Command::Combine);
    let ids = s.scene.object_ids();
    ensure(ids.len() == 1, || format!("expected one object, found {}", ids.len()))?;
    let o = s.scene.object(ids[0]).unwrap();
    let report = validate_mesh(&o.baked);
    ensure(report.watertight, || report.to_string())?;
    let v = mesh_volume(&o.baked).unwrap();
    // An axis-aligned cube loses exactly one octant of the sphere.
    let analytic = edge.powi(3) - (4.0 / 3.0) * PI * r.powi(3) / 8.0;
    let tree = world_tree(&s.scene, ids[0]);
    let faceted_oracle = oracle(std::slice::from_ref(&tree), &faceted());
    let analytic_oracle = oracle(&[tree], &ShapeModel::Analytic);
    let (e_oracle, e_formula) = (rel(v, faceted_oracle), rel(v, analytic));
    ensure(e_oracle <= VOLUME_REL, || format!("mesh {v:.6e} vs oracle {faceted_oracle:.6e}"))?;
    ensure(e_formula <= VOLUME_REL, || format!("mesh {v:.6e} vs closed form {analytic:.6e}"))?;
    ensure(rel(analytic_oracle, analytic) <= VOLUME_REL, || {
        format!("analytic oracle {analytic_oracle:.6e} vs closed form {analytic:.6e}")
    })?;
    Ok(format!(
        "{:.3} cm³; oracle {:.3} ({:.2}%), closed form {:.3} ({:.2}%)",
        v * 1e6,
        faceted_oracle * 1e6,
        100.0 * e_oracle,
        analytic * 1e6,
        100.0 * e_formula
    ))
}

// ------------------------------------------------------------------ capacity

fn box_center(scene: &SceneDocument) -> Point3<f64> {
    manipulation_box(scene).unwrap().bounds().center()
}

/// Create a cuboid of `size`, turned `yaw` degrees about y, centered at `at`.
fn place_cuboid(s: &mut Session, size: [f64; 3], yaw: f64, at: Point3<f64>) {
    run(s, Command::Create { kind: PrimitiveKind::Cube });
    for (k, len) in size.iter().enumerate() {
        run(s, Command::Resize { axis: Axis::from_index(k), length: *len });
    }
    if yaw != 0.0 {
        run(s, Command::Rotate { axis: Axis::Y, degrees: yaw, snap: false });
    }
    let d = at - box_center(&s.scene);
    run(s, Command::Move { delta: d.into(), snap: false });
}

fn select_all_and_combine(s: &mut Session) -> Result<Duration, String> {
    run(s, Command::Mode { mode: SelectionMode::Multiple });
    run(s, Command::SelectAll);
    let start = Instant::now();
    s.execute(&Command::Combine).map_err(|e| format!("combine: {e}"))?;
    Ok(start.elapsed())
}

fn capacity() -> Outcome {
    // 300 cuboids in a 20 x 15 array, neighbours overlapping.
    let mut s = table_session();
    let grid = s.scene.grid().unwrap().clone();
    let origin = grid.center();
    for i in 0..300 {
        let (a, b) = ((i % 20) as f64, (i / 20) as f64);
        let at = origin + grid.u * (0.04 * a - 0.4) + grid.v * (0.04 * b - 0.3) + grid.normal * 0.025;
        place_cuboid(&mut s, [0.05, 0.05, 0.05], 0.0, at);
    }
    let c = s.scene.counters();
    ensure(c.blocks == 300 && c.vertices == 2400, || format!("counters {c:?}"))?;
    let reloaded = load_document(&save_document(&s.scene)).map_err(|e| format!("reload: {e}"))?;
    ensure(reloaded.counters() == c, || "reload changed the counters".into())?;
    let mut s = Session::new(reloaded);
    run(&mut s, Command::Mode { mode: SelectionMode::Multiple });
    run(&mut s, Command::SelectAll);
    run(&mut s, Command::Move { delta: [0.013, 0.0, -0.007], snap: true });
    run(&mut s, Command::Rotate { axis: Axis::Y, degrees: 15.0, snap: true });
    run(&mut s, Command::Resize { axis: Axis::X, length: 0.9 });
    let big = select_all_and_combine(&mut s)?;
    let merged = s.scene.objects().next().unwrap();
    let report = validate_mesh(&merged.baked);
    ensure(report.watertight, || format!("300-block combine: {report}"))?;
    let (v, expected) = (mesh_volume(&merged.baked).unwrap(), oracle(&[world_tree(&s.scene, merged.id)], &faceted()));
    ensure(rel(v, expected) <= VOLUME_REL, || format!("300-block volume {v:.6e} vs oracle {expected:.6e}"))?;

    let over = s.execute(&Command::Create { kind: PrimitiveKind::Cube });
    ensure(matches!(over, Err(Error::Capacity { limit: 300, .. })), || format!("301st block gave {over:?}"))?;

    // Bowl: 8 flaring tiers of 32 overlapping tiles.
    let mut s = table_session();
    let grid = s.scene.grid().unwrap().clone();
    let center = grid.center();
    for tier in 0..8 {
        let radius = 0.06 + 0.006 * tier as f64;
        for k in 0..32 {
            let theta = 2.0 * PI * k as f64 / 32.0;
            let at = center
                + grid.u * (radius * theta.cos())
                + grid.v * (radius * theta.sin())
                + grid.normal * (0.006 + 0.01 * tier as f64);
            // Tiles face the bowl's axis: tangential width, radial thickness.
            place_cuboid(&mut s, [0.006, 0.012, 0.016], -theta.to_degrees(), at);
        }
    }
    let c = s.scene.counters();
    ensure(c.blocks == 256 && c.vertices == 2048, || format!("bowl counters {c:?}"))?;
    let bowl = select_all_and_combine(&mut s)?;
    let merged = s.scene.objects().next().unwrap();
    let report = validate_mesh(&merged.baked);
    ensure(report.watertight, || format!("bowl combine: {report}"))?;
    let (bv, expected) = (mesh_volume(&merged.baked).unwrap(), oracle(&[world_tree(&s.scene, merged.id)], &faceted()));
    ensure(rel(bv, expected) <= VOLUME_REL, || format!("bowl volume {bv:.6e} vs oracle {expected:.6e}"))?;
    ensure(bowl <= BOWL_BUDGET, || format!("256-block combine took {bowl:.2?}, budget {BOWL_BUDGET:?}"))?;
    Ok(format!(
        "300 cuboids combine in {big:.2?} ({:.1} cm³); 256-block bowl in {bowl:.2?} ({:.1} cm³); block 301 refused",
        v * 1e6,
        bv * 1e6
    ))
}

// --------------------------------------------------------------------- snap

fn grid_extent(g: &WorkspaceGrid, scene: &SceneDocument, k: usize) -> (f64, f64) {
    let b = manipulation_box(scene).unwrap().bounds();
    let cs = b.corners().map(|c| g.to_grid(&c)[k]);
    (cs.iter().copied().fold(f64::INFINITY, f64::min), cs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn on_multiple(x: f64, s: f64) -> bool {
    let t = x / s;
    (t - t.round()).abs() * s <= LATTICE_TOL
}

/// A cuboid whose box min sits at `min` in grid coordinates.
fn cuboid_at(size: [f64; 3], min: Vector3<f64>) -> (Session, WorkspaceGrid) {
    let mut s = table_session();
    let g = s.scene.grid().unwrap().clone();
    run(&mut s, Command::Create { kind: PrimitiveKind::Cube });
    for (k, len) in size.iter().enumerate() {
        run(&mut s, Command::Resize { axis: Axis::from_index(k), length: *len });
    }
    let here = Vector3::from_fn(|k, _| grid_extent(&g, &s.scene, k).0);
    let shift = g.from_grid(&min) - g.from_grid(&here);
    run(&mut s, Command::Move { delta: shift.into(), snap: false });
    (s, g)
}

fn worked_examples() -> Result<(), String> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    // Rule 1: the face nearer the grid plane snaps to the nearest plane.
    let (mut s, g) = cuboid_at([0.1; 3], Vector3::new(0.2, 0.2, 0.013));
    let d = DragSession::begin(&s.scene, Handle::Move, None).unwrap();
    d.apply_move(&mut s.scene, d.grab_start, SnapMode::Snapped).unwrap();
    let (lo, _) = grid_extent(&g, &s.scene, 2);
    ensure(close(lo, 0.02), || format!("rule 1: bottom at {lo}, want 0.02"))?;

    // Rule 2: moving +u from [0, 0.1] by 5 mm snaps the leading face 0.105 to 0.10.
    let (mut s, g) = cuboid_at([0.1; 3], Vector3::new(0.0, 0.2, 0.0));
    let d = DragSession::begin(&s.scene, Handle::Move, None).unwrap();
    d.apply_move(&mut s.scene, d.grab_start + g.u * 0.005, SnapMode::Snapped).unwrap();
    let (lo, hi) = grid_extent(&g, &s.scene, 0);
    ensure(close(lo, 0.0) && close(hi, 0.10), || format!("rule 2: u extent [{lo}, {hi}], want [0, 0.10]"))?;

    // Snapped corner: hand at (0.031, 0.049, 0.012) lands on (0.04, 0.04, 0.02).
    let (mut s, g) = cuboid_at([0.1; 3], Vector3::new(-0.1, -0.1, -0.1));
    let b = manipulation_box(&s.scene).unwrap().bounds();
    let index = (0..8u8)
        .max_by(|&a, &c| g.to_grid(&b.corner(a as usize)).sum().total_cmp(&g.to_grid(&b.corner(c as usize)).sum()))
        .unwrap();
    let d = DragSession::begin(&s.scene, Handle::Corner { index }, None).unwrap();
    d.apply_scale_corner(&mut s.scene, g.from_grid(&Vector3::new(0.031, 0.049, 0.012)), false, SnapMode::Snapped)
        .unwrap();
    let c = g.to_grid(&manipulation_box(&s.scene).unwrap().bounds().corner(index as usize));
    ensure((c - Vector3::new(0.04, 0.04, 0.02)).norm() <= 1e-12, || format!("snapped corner at {c:?}"))?;

    // Rotation: free 37, snapped 37 -> 30, tie 37.5 -> 45.
    let (mut s, _) = cuboid_at([0.1; 3], Vector3::new(0.0, 0.0, 0.0));
    let d = DragSession::begin(&s.scene, Handle::Rotate { axis: Axis::Y }, None).unwrap();
    for (raw, snap, want) in [(37.0, SnapMode::Free, 37.0), (37.0, SnapMode::Snapped, 30.0), (37.5, SnapMode::Snapped, 45.0)]
    {
        let got = d.apply_rotation(&mut s.scene, f64::to_radians(raw), snap).unwrap().to_degrees();
        ensure((got - want).abs() <= 1e-9, || format!("rotation {raw} {snap:?} gave {got}, want {want}"))?;
    }
    Ok(())
}

fn snap_semantics() -> Outcome {
    worked_examples()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ea1);
    let step = 15f64.to_radians();
    let mut tally = [0usize; 3];
    for i in 0..SNAP_DRAGS {
        let size = [rng.gen_range(0.02..0.15), rng.gen_range(0.02..0.15), rng.gen_range(0.02..0.15)];
        let min = Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.2));
        let (mut s, g) = cuboid_at(size, min);
        match i % 3 {
            0 => {
                let raw = g.u * rng.gen_range(-0.1..0.1) + g.v * rng.gen_range(-0.1..0.1) + g.normal * rng.gen_range(-0.05..0.1);
                let (n_lo, n_hi) = grid_extent(&g, &s.scene, 2);
                let shift = raw.dot(&g.normal);
                // Normal axis: whichever face the unsnapped move leaves nearer
                // the plane. In-plane: the face on the side of motion.
                let low_nearer = (n_lo + shift).abs() <= (n_hi + shift).abs();
                let d = DragSession::begin(&s.scene, Handle::Move, None).unwrap();
                d.apply_move(&mut s.scene, d.grab_start + raw, SnapMode::Snapped).unwrap();
                for k in 0..3 {
                    let (lo, hi) = grid_extent(&g, &s.scene, k);
                    let high = if k == 2 { !low_nearer } else { raw.dot(&g.axis(k)) > 0.0 };
                    let face = if high { hi } else { lo };
                    ensure(on_multiple(face, g.spacing), || format!("drag {i}: axis {k} face at {face}"))?;
                }
            }
            1 => {
                let axis = Axis::ALL[rng.gen_range(0..3)];
                let raw: f64 = rng.gen_range(-400.0f64..400.0).to_radians();
                let id = s.scene.selected_ids()[0];
                let q0 = s.scene.object(id).unwrap().transform.rotation;
                let d = DragSession::begin(&s.scene, Handle::Rotate { axis }, None).unwrap();
                let a = d.apply_rotation(&mut s.scene, raw, SnapMode::Snapped).unwrap();
                ensure(((a / step) - (a / step).round()).abs() * step <= 1e-9, || format!("drag {i}: angle {a}"))?;
                ensure((a - raw).abs() <= step / 2.0 + 1e-12, || format!("drag {i}: {a} is not nearest to {raw}"))?;
                let turned = s.scene.object(id).unwrap().transform.rotation * q0.inverse();
                let want = a.rem_euclid(2.0 * PI);
                let want = want.min(2.0 * PI - want);
                ensure((turned.angle() - want).abs() <= 1e-9, || format!("drag {i}: turned {}", turned.angle()))?;
            }
            _ => {
                let index: u8 = rng.gen_range(0..8);
                let uniform = rng.gen_bool(0.3);
                let before = manipulation_box(&s.scene).unwrap().bounds();
                let anchor = before.corner(7 - index as usize);
                let grabbed = before.corner(index as usize);
                // Pull away from the anchor so no clamp engages.
                let outward = (grabbed - anchor).map(f64::signum);
                let pull = Vector3::new(rng.gen_range(-0.01..0.08), rng.gen_range(-0.01..0.08), rng.gen_range(-0.01..0.08));
                let d = DragSession::begin(&s.scene, Handle::Corner { index }, None).unwrap();
                let target = d.grab_start + outward.component_mul(&pull);
                d.apply_scale_corner(&mut s.scene, target, uniform, SnapMode::Snapped).unwrap();
                let after = manipulation_box(&s.scene).unwrap().bounds();
                let moved = (after.corner(7 - index as usize) - anchor).norm();
                ensure(moved < ANCHOR_TOL, || format!("drag {i}: anchor moved {moved:e}"))?;
                if uniform {
                    let (a, b) = (before.size(), after.size());
                    for (p, q) in [(0, 1), (1, 2), (0, 2)] {
                        let (r0, r1) = (a[p] / a[q], b[p] / b[q]);
                        ensure((r0 - r1).abs() <= 1e-9 * r0, || format!("drag {i}: aspect {r0} -> {r1}"))?;
                    }
                } else {
                    let corner = after.corner(index as usize);
                    ensure(g.on_lattice(&corner), || format!("drag {i}: corner {:?} off the lattice", g.to_grid(&corner)))?;
                }
            }
        }
        tally[i % 3] += 1;
    }
    Ok(format!(
        "worked examples exact; {} snapped drags ({} moves, {} rotations, {} corners) on the lattice",
        SNAP_DRAGS, tally[0], tally[1], tally[2]
    ))
}

// ---------------------------------------------------------------------- STL

/// Minimal binary STL reader: triangle vertices in file order.
fn read_binary_stl(bytes: &[u8]) -> Result<Vec<[[f32; 3]; 3]>, String> {
    ensure(bytes.len() >= 84, || "shorter than a header".into())?;
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    ensure(bytes.len() == 84 + 50 * n, || format!("{} bytes for {n} triangles", bytes.len()))?;
    let f = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    Ok((0..n)
        .map(|t| {
            let base = 84 + 50 * t + 12;
            [0, 1, 2].map(|v| [0, 1, 2].map(|c| f(base + 12 * v + 4 * c)))
        })
        .collect())
}

fn stl_volume(tris: &[[[f32; 3]; 3]]) -> f64 {
    tris.iter()
        .map(|t| {
            let [a, b, c] = t.map(|p| Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64));
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

fn stl_correctness() -> Outcome {
    let tess = TessellationSpec::default();
    let cube = make_primitive(PrimitiveKind::Cube, &tess).unwrap();
    let bytes = export_meshes(&[&cube], StlFormat::Binary).unwrap().to_bytes();
    ensure(bytes.len() == 684, || format!("unit cube is {} bytes", bytes.len()))?;
    let tris = read_binary_stl(&bytes)?;
    let lo = tris.iter().flatten().fold([f32::MAX; 3], |m, p| [0, 1, 2].map(|i| m[i].min(p[i])));
    let hi = tris.iter().flatten().fold([f32::MIN; 3], |m, p| [0, 1, 2].map(|i| m[i].max(p[i])));
    ensure((0..3).all(|i| (hi[i] - lo[i] - 1000.0).abs() < 1e-3), || format!("cube spans {lo:?}..{hi:?} mm"))?;

    let mut worst = 0.0f64;
    let mut shapes: Vec<Mesh> = PrimitiveKind::ALL
        .iter()
        .map(|k| {
            let t = Transform::new(
                Vector3::new(0.3, -0.2, 0.1),
                UnitQuaternion::from_euler_angles(0.3, -0.7, 1.1),
                Vector3::new(0.05, 0.08, 0.12),
            );
            transform_mesh(&make_primitive(*k, &tess).unwrap(), &t)
        })
        .collect();
    shapes.push(cube);
    for m in &shapes {
        let bytes = export_meshes(&[m], StlFormat::Binary).unwrap().to_bytes();
        let again = StlDocument::parse(&bytes).map_err(|e| e.to_string())?.to_bytes();
        ensure(again == bytes, || "export -> import -> export changed the bytes".into())?;
        let ascii = export_meshes(&[m], StlFormat::Ascii).unwrap().to_bytes();
        let ascii_again = StlDocument::parse(&ascii).map_err(|e| e.to_string())?.to_bytes();
        ensure(ascii_again == ascii, || "ASCII roundtrip changed the bytes".into())?;
        let e = rel(stl_volume(&read_binary_stl(&bytes)?), 1e9 * mesh_volume(m).unwrap());
        worst = worst.max(e);
        ensure(e <= STL_VOLUME_REL, || format!("STL volume off by {e:e}"))?;
    }
    Ok(format!("unit cube 684 bytes; {} shapes roundtrip byte-identical; worst volume error {worst:.1e}", shapes.len()))
}

// ---------------------------------------------------------------- fabrication

struct Fab {
    server: ServerHandle,
    network: Arc<MockNetwork>,
    clock: ManualClock,
    agent: ureq::Agent,
    _dir: tempfile::TempDir,
}

fn read(mut resp: ureq::http::Response<ureq::Body>) -> (u16, Value) {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap_or_default();
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn cube_stl(mm: f64) -> Vec<u8> {
    let unit = make_primitive(PrimitiveKind::Cube, &TessellationSpec::default()).unwrap();
    let mesh = transform_mesh(&unit, &Transform::from_scale(Vector3::repeat(mm / 1000.0)));
    export_meshes(&[&mesh], StlFormat::Binary).unwrap().to_bytes()
}

impl Fab {
    fn new() -> Fab {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServerConfig { storage_dir: dir.path().join("jobs"), tick: None, ..ServerConfig::default() };
        let network = Arc::new(MockNetwork::new(1));
        let clock = ManualClock::new(10_000);
        let fab = Arc::new(cfg.build_service(network.clone(), Some(Arc::new(clock.clone()))).unwrap());
        let kernel = Arc::new(Kernel::new(table_session(), Some(Arc::new(fab.clone()) as Arc<dyn FabBackend>)));
        let server = spawn(app(kernel, fab.clone()), fab, "127.0.0.1", 0, None).unwrap();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Fab { server, network, clock, agent, _dir: dir }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }

    fn json(&self, method: &str, path: &str, body: Value) -> (u16, Value) {
        let req = match method {
            "POST" => self.agent.post(self.url(path)),
            _ => self.agent.put(self.url(path)),
        };
        read(req.content_type("application/json").send(body.to_string()).unwrap())
    }

    fn slice(&self, stl: &[u8], query: &str) -> (u16, Value) {
        read(self.agent.post(self.url(&format!("/slice{query}"))).send(stl).unwrap())
    }

    fn sliced(&self, mm: f64) -> String {
        let (code, body) = self.slice(&cube_stl(mm), "?layer_height=0.2");
        assert_eq!(code, 200, "{body}");
        body["job_id"].as_str().unwrap().to_string()
    }

    fn print(&self, id: &str, printer: &str) -> (u16, Value) {
        self.json("POST", "/print", json!({"id": id, "printer_address": printer}))
    }

    fn command(&self, id: &str, cmd: &str) -> (u16, Value) {
        self.json("PUT", "/print", json!({"id": id, "command": cmd}))
    }

    fn status(&self, id: &str) -> Value {
        read(self.agent.get(self.url(&format!("/print?id={id}"))).call().unwrap()).1
    }

    fn ticks(&self, n: usize) {
        for _ in 0..n {
            self.server.service.tick();
        }
    }

    /// A fresh job driven into `state` on its own printer.
    fn job_in(&self, state: &str, printer: &str) -> String {
        let id = self.sliced(10.0);
        if state == "sliced" {
            return id;
        }
        if state == "failed" {
            let p = self.network.printer(printer).unwrap();
            p.inject(Faults { reject_handshake: false, drop_after_layer: Some(2) });
        }
        assert_eq!(self.print(&id, printer).0, 200);
        match state {
            "paused" => assert_eq!(self.command(&id, "pause").0, 200),
            "aborted" => assert_eq!(self.command(&id, "stop").0, 200),
            "done" | "failed" => self.ticks(60),
            _ => {}
        }
        id
    }
}

/// Legal control moves; everything else is refused with 409.
fn expected_move(state: &str, cmd: &str) -> Option<&'static str> {
    match (state, cmd) {
        ("printing", "pause") => Some("paused"),
        ("printing", "stop") => Some("aborted"),
        ("paused", "continue") => Some("printing"),
        ("paused", "stop") => Some("aborted"),
        _ => None,
    }
}

fn fabrication_protocol() -> Outcome {
    let start = Instant::now();
    let f = Fab::new();

    let (code, body) = f.slice(&cube_stl(10.0), "?layer_height=0.2");
    ensure(code == 200 && body["total_layers"] == 50, || format!("10 mm cube sliced to {code} {body}"))?;

    let states = ["sliced", "printing", "paused", "done", "aborted", "failed"];
    let mut cases = 0;
    for state in states {
        for cmd in ["continue", "pause", "stop"] {
            let printer = format!("mock://{state}-{cmd}");
            let id = f.job_in(state, &printer);
            let before = f.status(&id);
            ensure(before["state"] == state, || format!("could not reach {state}: {before}"))?;
            let (code, after) = f.command(&id, cmd);
            match expected_move(state, cmd) {
                Some(next) => ensure(code == 200 && after["state"] == next, || {
                    format!("{state} + {cmd}: {code} {after}, want {next}")
                })?,
                None => {
                    ensure(code == 409, || format!("{state} + {cmd}: {code}, want 409"))?;
                    let now = f.status(&id);
                    ensure(now["state"] == state, || format!("{state} + {cmd} moved the job to {}", now["state"]))?;
                }
            }
            cases += 1;
        }
    }
    ensure(f.command("no-such-job", "pause").0 == 404, || "unknown job was not 404".into())?;

    // Pause freezes progress; stop at layer 10 of 50 keeps 20%.
    let id = f.sliced(10.0);
    f.print(&id, "mock://progress");
    f.ticks(10);
    f.command(&id, "pause");
    f.ticks(5);
    let paused = f.status(&id);
    ensure(paused["current_layer"] == 10, || format!("paused job advanced: {paused}"))?;
    let (_, stopped) = f.command(&id, "stop");
    ensure(stopped["state"] == "aborted" && stopped["progress"] == 20.0, || format!("stop gave {stopped}"))?;

    // One handshake for three jobs inside the token lifetime, one more after.
    for _ in 0..3 {
        let id = f.sliced(10.0);
        ensure(f.print(&id, "mock://shared").0 == 200, || "shared printer refused a job".into())?;
        f.ticks(60);
    }
    let shared = f.network.printer("mock://shared").unwrap();
    ensure(shared.handshake_count() == 1, || format!("{} handshakes for 3 jobs", shared.handshake_count()))?;
    f.clock.advance(3601);
    let id = f.sliced(10.0);
    f.print(&id, "mock://shared");
    ensure(shared.handshake_count() == 2, || format!("{} handshakes after expiry", shared.handshake_count()))?;
    f.ticks(60);

    // Two printers at once, each with its own G-code.
    let (a, b) = (f.sliced(10.0), f.sliced(20.0));
    let (ra, rb) = std::thread::scope(|s| {
        let ta = s.spawn(|| f.print(&a, "mock://left"));
        let tb = s.spawn(|| f.print(&b, "mock://right"));
        (ta.join().unwrap(), tb.join().unwrap())
    });
    ensure(ra.0 == 200 && rb.0 == 200, || format!("concurrent prints: {} {}", ra.0, rb.0))?;
    f.ticks(3);
    ensure(f.status(&a)["state"] == "printing" && f.status(&b)["state"] == "printing", || "not both printing".into())?;
    f.ticks(120);
    let (ja, jb) = (f.status(&a), f.status(&b));
    ensure(ja["state"] == "done" && jb["state"] == "done", || format!("{} / {}", ja["state"], jb["state"]))?;
    let left = f.network.printer("mock://left").unwrap().received_hashes();
    let right = f.network.printer("mock://right").unwrap().received_hashes();
    ensure(left == vec![ja["gcode_sha256"].as_str().unwrap().to_string()], || "left printer got foreign G-code".into())?;
    ensure(right == vec![jb["gcode_sha256"].as_str().unwrap().to_string()], || "right printer got foreign G-code".into())?;
    ensure(left != right, || "both printers got the same G-code".into())?;

    // A part outside the build volume blocks printing.
    let script = "create cube\nresize x 2cm\nresize y 1cm\nresize z 2cm\nprinter manual tiny 40mm 40mm 40mm\n\
                  printer-address printer mock://plate\ndrop\nselect 2\nmove 3cm 0 0\n";
    let (code, body) = read(f.agent.post(f.url("/api/script")).send(script).unwrap());
    ensure(code == 200, || format!("plate script: {body}"))?;
    let jobs = f.server.service.job_ids().len();
    let (code, body) = read(f.agent.post(f.url("/api/print")).send_empty().unwrap());
    ensure(code == 409, || format!("out-of-bounds print gave {code} {body}"))?;
    ensure(f.server.service.job_ids().len() == jobs, || "a job was created for an out-of-bounds plate".into())?;
    f.json("POST", "/api/command", json!({"op": "move", "delta": [-0.03, 0, 0]}));
    let (code, body) = read(f.agent.post(f.url("/api/print")).send_empty().unwrap());
    ensure(code == 200 && body["state"] == "printing", || format!("in-bounds print gave {code} {body}"))?;

    let took = start.elapsed();
    ensure(took <= FAB_BUDGET, || format!("took {took:.1?}, budget {FAB_BUDGET:?}"))?;
    Ok(format!("50 layers; {cases} state/command pairs; 1 handshake per token lifetime; two printers; bounds gate; {took:.1?}"))
}

// ------------------------------------------------------------ undo and redo

fn random_command(rng: &mut ChaCha8Rng, scene: &SceneDocument) -> Command {
    let ids = scene.object_ids();
    let some_id = |rng: &mut ChaCha8Rng| if ids.is_empty() { 1 } else { ids[rng.gen_range(0..ids.len())] };
    match rng.gen_range(0..100) {
        0..=11 => Command::Create { kind: PrimitiveKind::ALL[rng.gen_range(0..7)] },
        12..=23 => Command::Select { ids: vec![IdRef::Id(some_id(rng))] },
        24..=25 => Command::Mode {
            mode: if rng.gen_bool(0.5) { SelectionMode::Multiple } else { SelectionMode::Single },
        },
        26..=27 => Command::SelectAll,
        28 => Command::DeselectAll,
        29..=32 => {
            if rng.gen_bool(0.5) {
                Command::Hole { ids: None }
            } else {
                Command::Solid { ids: None }
            }
        }
        33..=40 => Command::Move {
            delta: [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)],
            snap: rng.gen_bool(0.5),
        },
        41..=45 => Command::Rotate {
            axis: Axis::ALL[rng.gen_range(0..3)],
            degrees: rng.gen_range(-90.0..90.0),
            snap: rng.gen_bool(0.5),
        },
        46..=50 => Command::Resize { axis: Axis::ALL[rng.gen_range(0..3)], length: rng.gen_range(0.01..0.2) },
        51..=54 => Command::Duplicate,
        55..=58 => Command::Delete,
        59..=61 => Command::Combine,
        62..=63 => Command::Color { rgb: [rng.gen(), rng.gen(), rng.gen()] },
        64 => Command::Printer { spec: deskcad_core::fabrication::TwinSpec::Preset("generic-220".into()) },
        65..=66 => Command::Drop,
        67..=85 => Command::Undo,
        _ => Command::Redo,
    }
}

fn undo_redo_persistence() -> Outcome {
    let mut refused = 0;
    let mut undos = 0;
    for seed in [11u64, 12] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = table_session();
        for i in 0..FUZZ_COMMANDS {
            let cmd = random_command(&mut rng, &s.scene);
            undos += matches!(cmd, Command::Undo | Command::Redo) as usize;
            let before = save_document(&s.scene);
            if s.execute(&cmd).is_err() {
                refused += 1;
                ensure(save_document(&s.scene) == before, || format!("seed {seed} op {i}: refused {cmd:?} changed the document"))?;
            }
            s.scene.check_invariants().map_err(|e| format!("seed {seed} op {i} {cmd:?}: {e}"))?;
            ensure(s.scene.counters() == s.scene.recount(), || format!("seed {seed} op {i}: counters drifted"))?;
            let live: std::collections::BTreeSet<u64> = s.scene.object_ids().into_iter().collect();
            ensure(s.scene.selection().is_subset(&live), || format!("seed {seed} op {i}: selection names a dead id"))?;
            if i % 100 == 99 {
                let bytes = save_document(&s.scene);
                let again = save_document(&load_document(&bytes).map_err(|e| e.to_string())?);
                ensure(again == bytes, || format!("seed {seed} op {i}: save/load changed the bytes"))?;
            }
        }
    }
    Ok(format!("2 x {FUZZ_COMMANDS} commands ({undos} undo/redo, {refused} refused); save/load byte-stable"))
}

// ------------------------------------------------------------------ CLI shapes

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn deskcad(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Process::new(env!("CARGO_BIN_EXE_deskcad")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    ensure(out.status.success(), || format!("deskcad {}: {text}", args.join(" ")))?;
    Ok(text)
}

fn cli_shapes() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (name, blocks) in [("pen-holder", 2), ("ramp", 3), ("key-hanger", 7)] {
        let doc = format!("{name}.json");
        let stl = format!("{name}.stl");
        deskcad(&["run", fixture(&format!("{name}.dcs")).to_str().unwrap(), "--out", &doc], dir.path())?;
        let report = deskcad(&["validate", &doc], dir.path())?;
        ensure(!report.contains("not watertight"), || report.clone())?;
        deskcad(&["export", &doc, "--stl", &stl], dir.path())?;

        let scene = load_document(&std::fs::read(dir.path().join(&doc)).unwrap()).map_err(|e| e.to_string())?;
        let ids = scene.object_ids();
        ensure(ids.len() == 1, || format!("{name}: {} objects after combine", ids.len()))?;
        let o = scene.object(ids[0]).unwrap();
        ensure(o.block_count() == blocks, || format!("{name}: {} blocks, want {blocks}", o.block_count()))?;
        let v = mesh_volume(&o.baked).unwrap();
        let bytes = std::fs::read(dir.path().join(&stl)).unwrap();
        let tris = read_binary_stl(&bytes)?;
        let m = StlDocument::parse(&bytes).map_err(|e| e.to_string())?.to_mesh();
        ensure(validate_mesh(&m).watertight, || format!("{name}: exported STL is open"))?;
        ensure(rel(stl_volume(&tris), 1e9 * v) <= STL_VOLUME_REL, || format!("{name}: STL volume drifted"))?;
        let mut note = format!("{name} {:.2} cm³", v * 1e6);
        if name == "pen-holder" {
            let expected = oracle(&[world_tree(&scene, ids[0])], &faceted());
            let e = rel(v, expected);
            ensure(e <= VOLUME_REL, || format!("pen holder {v:.6e} vs oracle {expected:.6e}"))?;
            note.push_str(&format!(" (oracle {:.2}%)", 100.0 * e));
        }
        notes.push(note);
    }
    Ok(notes.join(", "))
}

// ------------------------------------------------------------------- runner

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("csg oracle suite", csg_oracle_suite),
        ("cube with a corner sphere hole", corner_bite),
        ("capacity", capacity),
        ("snap semantics", snap_semantics),
        ("stl correctness", stl_correctness),
        ("fabrication protocol", fabrication_protocol),
        ("undo/redo and persistence", undo_redo_persistence),
        ("cli application shapes", cli_shapes),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
