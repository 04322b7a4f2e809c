//! Sequential against rayon-parallel scheduling for the two heavy loops: the
//! voxel oracle sweep and the clustered boolean reduction.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deskcad_core::csg::{boolean_mesh, leaf, voxel_oracle_volume_with, BooleanOptions, CsgTree, ShapeModel};
use deskcad_core::geometry::{UnitQuaternion, Vector3};
use deskcad_core::{make_primitive, transform_mesh, Mesh, Parallelism, PrimitiveKind, TessellationSpec, Transform};

const POLICIES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

/// A ring of tilted blocks and cylinders, overlapping their neighbours.
fn ring(count: usize) -> Vec<(PrimitiveKind, Transform)> {
    (0..count)
        .map(|i| {
            let a = i as f64 / count as f64 * std::f64::consts::TAU;
            let kind = if i % 2 == 0 { PrimitiveKind::Cube } else { PrimitiveKind::Cylinder };
            let t = Transform::new(
                Vector3::new(0.08 * a.cos(), 0.01 * (i % 3) as f64, 0.08 * a.sin()),
                UnitQuaternion::from_euler_angles(0.2, -a, 0.1),
                Vector3::new(0.03, 0.04, 0.02),
            );
            (kind, t)
        })
        .collect()
}

fn voxel_oracle(c: &mut Criterion) {
    let trees: Vec<CsgTree> = ring(16).into_iter().map(|(k, t)| leaf(k, t)).collect();
    let model = ShapeModel::Faceted(TessellationSpec::default());
    let mut group = c.benchmark_group("voxel_oracle_96");
    group.sample_size(10);
    for (name, par) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| voxel_oracle_volume_with(black_box(&trees), 96, &model, par).unwrap())
        });
    }
    group.finish();
}

fn boolean(c: &mut Criterion) {
    let tess = TessellationSpec::default();
    let meshes: Vec<Mesh> =
        ring(24).into_iter().map(|(k, t)| transform_mesh(&make_primitive(k, &tess).unwrap(), &t)).collect();
    let solids: Vec<&Mesh> = meshes.iter().step_by(3).chain(meshes.iter().skip(1).step_by(3)).collect();
    let holes: Vec<&Mesh> = meshes.iter().skip(2).step_by(3).collect();
    let mut group = c.benchmark_group("boolean_ring_24");
    group.sample_size(10);
    for (name, par) in POLICIES {
        let opts = BooleanOptions { parallelism: par, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| boolean_mesh(black_box(&solids), black_box(&holes), opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, voxel_oracle, boolean);
criterion_main!(benches);
