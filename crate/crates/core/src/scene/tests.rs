use super::*;
use crate::geometry::mesh_volume;

fn scene_on_table() -> SceneDocument {
    let mut s = SceneDocument::default();
    let top = s.room().face_by_label("table").unwrap();
    s.select_workspace(&top, DEFAULT_SPACING, 0.0).unwrap();
    s
}

#[test]
fn create_needs_a_grid() {
    let mut s = SceneDocument::default();
    assert!(matches!(s.create_object(PrimitiveKind::Cube), Err(Error::State(_))));
}

#[test]
fn first_cube() {
    let mut s = scene_on_table();
    let id = s.create_object(PrimitiveKind::Cube).unwrap();
    assert_eq!(id, 1);
    let o = s.object(id).unwrap();
    assert_eq!(o.solidity, Solidity::Solid);
    assert!((mesh_volume(&o.baked).unwrap() - 1e-3).abs() < 1e-15);
    let spawn = s.spawn_point().unwrap();
    assert!((o.bounds().center() - spawn).norm() < 1e-12);
}

#[test]
fn block_limit() {
    let mut s = scene_on_table();
    for _ in 0..300 {
        s.create_object(PrimitiveKind::Cube).unwrap();
    }
    let err = s.create_object(PrimitiveKind::Cube).unwrap_err();
    assert_eq!(
        err,
        Error::Capacity {
            what: "basic building blocks",
            limit: 300
        }
    );
    assert!(err.to_string().contains("300"));
    assert_eq!(s.counters().blocks, 300);
}

#[test]
fn sphere_adds_its_vertex_count() {
    let mut s = scene_on_table();
    let before = s.counters().vertices;
    s.create_object(PrimitiveKind::Sphere).unwrap();
    let expect = make_primitive(PrimitiveKind::Sphere, s.tessellation()).unwrap().vertex_count();
    assert_eq!(s.counters().vertices - before, expect);
}

#[test]
fn vertex_limit() {
    let mut s = scene_on_table();
    let per = make_primitive(PrimitiveKind::Sphere, s.tessellation()).unwrap().vertex_count();
    let fit = 20_000 / per;
    for _ in 0..fit {
        s.create_object(PrimitiveKind::Sphere).unwrap();
    }
    let err = s.create_object(PrimitiveKind::Sphere).unwrap_err();
    assert!(matches!(err, Error::Capacity { what: "vertices", limit: 20_000 }), "{err}");
}

#[test]
fn selection_modes() {
    let mut s = scene_on_table();
    let a = s.create_object(PrimitiveKind::Cube).unwrap();
    let b = s.create_object(PrimitiveKind::Cube).unwrap();
    s.select(a).unwrap();
    s.select(b).unwrap();
    assert_eq!(s.selected_ids(), vec![b]);

    s.set_selection_mode(SelectionMode::Multiple);
    s.set_selection_mode(SelectionMode::Multiple);
    s.select(a).unwrap();
    assert_eq!(s.selected_ids(), vec![a, b]);
    s.select(b).unwrap();
    assert_eq!(s.selected_ids(), vec![a]);

    s.deselect_all();
    assert!(s.selection().is_empty());
    assert!(matches!(s.select(99), Err(Error::NotFound(_))));
}

#[test]
fn solidity_duplicate_delete() {
    let mut s = scene_on_table();
    let a = s.create_object(PrimitiveKind::Cube).unwrap();
    let b = s.create_object(PrimitiveKind::Sphere).unwrap();
    s.set_solidity(&[a], Solidity::Hole).unwrap();
    assert_eq!(s.object(a).unwrap().render_hint(), RenderHint::TransparentMask);
    assert_eq!(s.object(b).unwrap().render_hint(), RenderHint::Opaque);

    let copies = s.duplicate(&[a, b]).unwrap();
    assert_eq!(copies.len(), 2);
    for (src, dup) in [a, b].iter().zip(&copies) {
        let v0 = mesh_volume(&s.object(*src).unwrap().baked).unwrap();
        let v1 = mesh_volume(&s.object(*dup).unwrap().baked).unwrap();
        assert!((v0 - v1).abs() < 1e-15);
        let shift = s.object(*dup).unwrap().bounds().min - s.object(*src).unwrap().bounds().min;
        assert!((shift - s.grid().unwrap().u * DUPLICATE_OFFSET).norm() < 1e-12);
    }

    s.set_selection(&copies).unwrap();
    s.delete(&copies).unwrap();
    assert!(s.selection().is_empty());
    s.check_invariants().unwrap();
}

#[test]
fn ids_are_not_reused() {
    let mut s = scene_on_table();
    let a = s.create_object(PrimitiveKind::Cube).unwrap();
    s.delete(&[a]).unwrap();
    let b = s.create_object(PrimitiveKind::Cube).unwrap();
    assert!(b > a);
    s.undo().unwrap();
    s.undo().unwrap();
    let c = s.create_object(PrimitiveKind::Cube).unwrap();
    assert!(c > b);
}

#[test]
fn create_then_undo_restores_bytes() {
    let mut s = scene_on_table();
    let start = save_document(&s);
    s.create_object(PrimitiveKind::Cube).unwrap();
    let after = save_document(&s);
    s.undo().unwrap();
    assert_eq!(save_document(&s), start);
    s.redo().unwrap();
    assert_eq!(save_document(&s), after);
    assert_eq!(s.redo(), Err(Error::Boundary("redo")));
}

#[test]
fn undo_on_fresh_scene_is_a_boundary_error() {
    let mut s = SceneDocument::default();
    assert_eq!(s.undo(), Err(Error::Boundary("undo")));
}

#[test]
fn combine_then_undo_restores_inputs() {
    let mut s = scene_on_table();
    let cube = s.create_object(PrimitiveKind::Cube).unwrap();
    let sphere = s.create_object(PrimitiveKind::Sphere).unwrap();
    s.set_solidity(&[sphere], Solidity::Hole).unwrap();
    let before = save_document(&s);
    let id = s.combine(&[cube, sphere]).unwrap();
    assert_eq!(s.object_ids(), vec![id]);
    assert_eq!(s.selected_ids(), vec![id]);
    s.undo().unwrap();
    assert_eq!(save_document(&s), before);
    assert_eq!(s.object_ids(), vec![cube, sphere]);
}

#[test]
fn failed_combine_changes_nothing() {
    let mut s = scene_on_table();
    let a = s.create_object(PrimitiveKind::Cube).unwrap();
    s.set_solidity(&[a], Solidity::Hole).unwrap();
    let before = save_document(&s);
    let depth = s.history().len();
    assert!(matches!(s.combine(&[a]), Err(Error::Semantic(_))));
    assert_eq!(save_document(&s), before);
    assert_eq!(s.history().len(), depth);
}

#[test]
fn history_is_bounded() {
    let mut s = SceneDocument::with_settings(
        default_room(),
        Limits {
            history_depth: 5,
            ..Limits::default()
        },
        TessellationSpec::default(),
        BooleanOptions::default(),
    );
    let top = s.room().face_by_label("table").unwrap();
    s.select_workspace(&top, 0.02, 0.0).unwrap();
    for _ in 0..10 {
        s.create_object(PrimitiveKind::Cube).unwrap();
    }
    for _ in 0..5 {
        s.undo().unwrap();
    }
    assert_eq!(s.undo(), Err(Error::Boundary("undo")));
    assert_eq!(s.len(), 5);
}

#[test]
fn empty_scene_roundtrip() {
    let s = SceneDocument::default();
    let bytes = save_document(&s);
    assert_eq!(save_document(&load_document(&bytes).unwrap()), bytes);
}

#[test]
fn combined_scene_roundtrip() {
    let mut s = scene_on_table();
    let cube = s.create_object(PrimitiveKind::Cube).unwrap();
    let cyl = s.create_object(PrimitiveKind::Cylinder).unwrap();
    s.set_solidity(&[cyl], Solidity::Hole).unwrap();
    let id = s.combine(&[cube, cyl]).unwrap();
    let bytes = save_document(&s);
    let back = load_document(&bytes).unwrap();
    assert_eq!(save_document(&back), bytes);
    let v0 = mesh_volume(&s.object(id).unwrap().baked).unwrap();
    let v1 = mesh_volume(&back.object(id).unwrap().baked).unwrap();
    assert!((v0 - v1).abs() <= 1e-9);
    assert_eq!(back.next_id(), id + 1);
    back.check_invariants().unwrap();
}

#[test]
fn truncated_document_is_a_parse_error() {
    let mut s = scene_on_table();
    s.create_object(PrimitiveKind::Cube).unwrap();
    let bytes = save_document(&s);
    let cut = &bytes[..bytes.len() / 2];
    assert!(matches!(load_document(cut), Err(Error::Parse { .. })));
    let wrong = String::from_utf8(bytes.clone()).unwrap().replace("\"version\": 1", "\"version\": 9");
    assert!(matches!(load_document(wrong.as_bytes()), Err(Error::Parse { .. })));
}

#[test]
fn undo_drops_vanished_ids_from_the_selection() {
    use crate::fabrication::{drop_into_printer, make_printer_twin, PrinterPresets, TwinSpec};
    let mut s = scene_on_table();
    let id = s.create_object(PrimitiveKind::Cube).unwrap();
    make_printer_twin(&mut s, &TwinSpec::Preset("generic-220".into()), &PrinterPresets::builtin()).unwrap();
    let copy = drop_into_printer(&mut s, &[id]).unwrap()[0];
    s.set_selection(&[copy]).unwrap();
    s.undo().unwrap();
    assert!(s.object(copy).is_err());
    assert!(s.selection().is_empty());
    s.check_invariants().unwrap();
    s.redo().unwrap();
    s.check_invariants().unwrap();
}
