//! Randomized boolean scenes against the voxel oracle.

use deskcad_core::csg::{boolean_mesh, voxel_oracle_volume_with, BooleanOptions, CsgTree, ShapeModel, Solidity};
use deskcad_core::geometry::{UnitQuaternion, Vector3};
use deskcad_core::{
    make_primitive, mesh_volume, transform_mesh, validate_mesh, Mesh, Parallelism, PrimitiveKind, TessellationSpec,
    Transform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Part = (PrimitiveKind, Transform, Solidity);

fn random_scene(rng: &mut ChaCha8Rng) -> Vec<Part> {
    let n = rng.gen_range(1..=8);
    (0..n)
        .map(|i| {
            let kind = PrimitiveKind::ALL[rng.gen_range(0..7)];
            let solidity = if i == 0 || rng.gen_bool(0.6) { Solidity::Solid } else { Solidity::Hole };
            let t = Transform::new(
                Vector3::new(rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04)),
                UnitQuaternion::from_euler_angles(rng.gen_range(-3.2..3.2), rng.gen_range(-1.6..1.6), rng.gen_range(-3.2..3.2)),
                Vector3::new(rng.gen_range(0.02..0.1), rng.gen_range(0.02..0.1), rng.gen_range(0.02..0.1)),
            );
            (kind, t, solidity)
        })
        .collect()
}

fn oracle_tree(parts: &[Part]) -> CsgTree {
    let leaf = |(k, t, _): &Part| CsgTree::Leaf { kind: *k, transform: *t, solidity: Solidity::Solid };
    let of = |s: Solidity| parts.iter().filter(|p| p.2 == s).map(leaf).collect::<Vec<_>>();
    let holes = of(Solidity::Hole);
    if holes.is_empty() {
        return CsgTree::Union { children: of(Solidity::Solid) };
    }
    CsgTree::Difference {
        solid: Box::new(CsgTree::Union { children: of(Solidity::Solid) }),
        hole: Box::new(CsgTree::Union { children: holes }),
    }
}

/// Relative volume error of one scene, or a description of what broke.
fn check_scene(parts: &[Part], tess: &TessellationSpec) -> Result<f64, String> {
    let meshes: Vec<(Mesh, Solidity)> = parts
        .iter()
        .map(|(k, t, so)| (transform_mesh(&make_primitive(*k, tess).unwrap(), t), *so))
        .collect();
    let pick = |s: Solidity| meshes.iter().filter(|m| m.1 == s).map(|m| &m.0).collect::<Vec<_>>();
    let out = boolean_mesh(&pick(Solidity::Solid), &pick(Solidity::Hole), &BooleanOptions::default())
        .map_err(|e| e.to_string())?;
    let report = validate_mesh(&out);
    if !report.watertight {
        return Err(report.to_string());
    }
    let oracle =
        voxel_oracle_volume_with(&[oracle_tree(parts)], 128, &ShapeModel::Faceted(*tess), Parallelism::Parallel).unwrap();
    let v = mesh_volume(&out).unwrap();
    Ok((v - oracle).abs() / oracle.max(1e-9))
}

#[test]
fn random_scenes_are_watertight_and_match_oracle() {
    let tess = TessellationSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..25 {
        let parts = random_scene(&mut rng);
        match check_scene(&parts, &tess) {
            Ok(rel) => assert!(rel <= 0.02, "scene {i}: relative error {rel:.4}"),
            Err(e) => panic!("scene {i}: {e}"),
        }
    }
}

/// Long sweep: `SEED=7 COUNT=1000 cargo test --release -- --ignored sweep`.
#[test]
#[ignore]
fn sweep() {
    let tess = TessellationSpec::default();
    let seed: u64 = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7);
    let count: usize = std::env::var("COUNT").ok().and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut failures) = (0.0f64, 0);
    let start = std::time::Instant::now();
    for i in 0..count {
        let parts = random_scene(&mut rng);
        match check_scene(&parts, &tess) {
            Ok(rel) => {
                worst = worst.max(rel);
                if rel > 0.02 {
                    failures += 1;
                    println!("scene {i}: relative error {rel:.4}");
                }
            }
            Err(e) => {
                failures += 1;
                println!("scene {i}: {e}");
            }
        }
    }
    println!("{failures} failures, worst {worst:.4} in {:?}", start.elapsed());
    assert_eq!(failures, 0);
}
