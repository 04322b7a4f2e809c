use super::boolean::{boolean_mesh, BooleanOptions};
use super::tree::{CsgTree, Solidity};
use crate::geometry::{Mesh, Transform};
use crate::{Error, Result};

/// RGB color attribute.
pub type Color = [u8; 3];

/// One selected object handed to [`combine`].
#[derive(Debug, Clone, Copy)]
pub struct CombineInput<'a> {
    /// World-space mesh of the object.
    pub mesh: &'a Mesh,
    /// Object-local construction tree.
    pub geometry: &'a CsgTree,
    /// Object pose, applied on top of `geometry`.
    pub transform: &'a Transform,
    pub solidity: Solidity,
    pub color: Color,
    /// Creation sequence number; breaks the "last solid" color tie.
    pub sequence: u64,
}

#[derive(Debug, Clone)]
pub struct CombineOutput {
    pub mesh: Mesh,
    pub tree: CsgTree,
    pub color: Color,
}

/// Mark every leaf of `tree` with `solidity`.
pub fn with_leaf_solidity(tree: &CsgTree, solidity: Solidity) -> CsgTree {
    match tree {
        CsgTree::Leaf { kind, transform, .. } => CsgTree::Leaf {
            kind: *kind,
            transform: *transform,
            solidity,
        },
        CsgTree::Placed { transform, child } => CsgTree::Placed {
            transform: *transform,
            child: Box::new(with_leaf_solidity(child, solidity)),
        },
        CsgTree::Union { children } => CsgTree::Union {
            children: children.iter().map(|c| with_leaf_solidity(c, solidity)).collect(),
        },
        CsgTree::Difference { solid, hole } => CsgTree::Difference {
            solid: Box::new(with_leaf_solidity(solid, solidity)),
            hole: Box::new(with_leaf_solidity(hole, Solidity::Hole)),
        },
    }
}

/// Union of every solid minus the union of every hole, as one solid
/// object colored like the most recently created solid.
///
/// The returned tree evaluates to exactly the returned mesh when the input
/// meshes are the evaluations of `Placed { transform, geometry }`.
pub fn combine(objects: &[CombineInput<'_>], opts: &BooleanOptions) -> Result<CombineOutput> {
    let last_solid = objects
        .iter()
        .filter(|o| o.solidity == Solidity::Solid)
        .max_by_key(|o| o.sequence)
        .ok_or_else(|| Error::Semantic("combine needs at least one solid object".into()))?;
    let color = last_solid.color;

    let placed = |o: &CombineInput<'_>| CsgTree::Placed {
        transform: *o.transform,
        child: Box::new(with_leaf_solidity(o.geometry, o.solidity)),
    };
    let (solids, holes): (Vec<&CombineInput<'_>>, Vec<&CombineInput<'_>>) =
        objects.iter().partition(|o| o.solidity == Solidity::Solid);
    let solid_tree = CsgTree::Union {
        children: solids.iter().map(|o| placed(o)).collect(),
    };
    let tree = if holes.is_empty() {
        solid_tree
    } else {
        CsgTree::Difference {
            solid: Box::new(solid_tree),
            hole: Box::new(CsgTree::Union {
                children: holes.iter().map(|o| placed(o)).collect(),
            }),
        }
    };

    let solid_meshes: Vec<&Mesh> = solids.iter().map(|o| o.mesh).collect();
    let hole_meshes: Vec<&Mesh> = holes.iter().map(|o| o.mesh).collect();
    let mesh = if holes.is_empty() && solids.len() == 1 {
        solid_meshes[0].clone()
    } else {
        boolean_mesh(&solid_meshes, &hole_meshes, opts)?
    };
    if mesh.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(CombineOutput { mesh, tree, color })
}
