use serde::{Deserialize, Serialize};

use super::boolean::{boolean_mesh, BooleanOptions};
use crate::exec;
use crate::geometry::{make_primitive, transform_mesh, Mesh, PrimitiveKind, TessellationSpec, Transform};
use crate::{Error, Result};

/// Whether an object adds or removes material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solidity {
    #[default]
    Solid,
    Hole,
}

impl std::str::FromStr for Solidity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solid" => Ok(Solidity::Solid),
            "hole" => Ok(Solidity::Hole),
            _ => Err(Error::Parameter(format!("unknown solidity `{s}`"))),
        }
    }
}

/// Construction history of an object's geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "node")]
pub enum CsgTree {
    Leaf {
        kind: PrimitiveKind,
        transform: Transform,
        solidity: Solidity,
    },
    /// A subtree placed by a transform; records the pose an object had when
    /// it was consumed by a combine.
    Placed { transform: Transform, child: Box<CsgTree> },
    Union { children: Vec<CsgTree> },
    Difference { solid: Box<CsgTree>, hole: Box<CsgTree> },
}

impl CsgTree {
    pub fn leaf(kind: PrimitiveKind) -> CsgTree {
        CsgTree::Leaf {
            kind,
            transform: Transform::identity(),
            solidity: Solidity::Solid,
        }
    }

    /// Number of primitive leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            CsgTree::Leaf { .. } => 1,
            CsgTree::Placed { child, .. } => child.leaf_count(),
            CsgTree::Union { children } => children.iter().map(CsgTree::leaf_count).sum(),
            CsgTree::Difference { solid, hole } => solid.leaf_count() + hole.leaf_count(),
        }
    }

    /// Checks structural invariants: valid transforms, non-empty unions and
    /// that every hole leaf sits under the hole side of a difference.
    pub fn check(&self) -> Result<()> {
        self.check_inner(false)
    }

    fn check_inner(&self, under_hole: bool) -> Result<()> {
        match self {
            CsgTree::Leaf { transform, solidity, .. } => {
                if !transform.is_valid() {
                    return Err(Error::Validity("leaf transform violates its invariants".into()));
                }
                if *solidity == Solidity::Hole && !under_hole {
                    return Err(Error::Validity("hole leaf outside a difference".into()));
                }
                Ok(())
            }
            CsgTree::Placed { transform, child } => {
                if !transform.is_valid() {
                    return Err(Error::Validity("placement transform violates its invariants".into()));
                }
                child.check_inner(under_hole)
            }
            CsgTree::Union { children } => {
                if children.is_empty() {
                    return Err(Error::Validity("empty union".into()));
                }
                children.iter().try_for_each(|c| c.check_inner(under_hole))
            }
            CsgTree::Difference { solid, hole } => {
                solid.check_inner(under_hole)?;
                hole.check_inner(true)
            }
        }
    }

    /// Evaluate to a mesh. Combined subtrees run through the boolean engine
    /// with `opts`, so evaluation is reproducible for a fixed seed.
    pub fn evaluate(&self, tess: &TessellationSpec, opts: &BooleanOptions) -> Result<Mesh> {
        match self {
            CsgTree::Leaf { kind, transform, .. } => Ok(transform_mesh(&make_primitive(*kind, tess)?, transform)),
            CsgTree::Placed { transform, child } => Ok(transform_mesh(&child.evaluate(tess, opts)?, transform)),
            CsgTree::Union { children } => {
                let meshes = eval_all(children, tess, opts)?;
                if meshes.len() == 1 {
                    return Ok(meshes.into_iter().next().unwrap_or_default());
                }
                let refs: Vec<&Mesh> = meshes.iter().collect();
                boolean_mesh(&refs, &[], opts)
            }
            CsgTree::Difference { solid, hole } => {
                let solids = operands(solid, tess, opts)?;
                let holes = operands(hole, tess, opts)?;
                let s: Vec<&Mesh> = solids.iter().collect();
                let h: Vec<&Mesh> = holes.iter().collect();
                boolean_mesh(&s, &h, opts)
            }
        }
    }
}

/// Direct children of a union are the boolean operands; anything else is a
/// single operand.
fn operands(tree: &CsgTree, tess: &TessellationSpec, opts: &BooleanOptions) -> Result<Vec<Mesh>> {
    match tree {
        CsgTree::Union { children } => eval_all(children, tess, opts),
        other => Ok(vec![other.evaluate(tess, opts)?]),
    }
}

fn eval_all(children: &[CsgTree], tess: &TessellationSpec, opts: &BooleanOptions) -> Result<Vec<Mesh>> {
    exec::map(opts.parallelism, children, |c| c.evaluate(tess, opts))
        .into_iter()
        .collect()
}
