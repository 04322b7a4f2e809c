use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::csg::{BooleanOptions, Color, CsgTree, Solidity};
use crate::geometry::{transform_mesh, Box3, Mesh, TessellationSpec, Transform};
use crate::Result;

pub type ObjectId = u64;

pub const DEFAULT_COLOR: Color = [66, 135, 245];

/// How a client should draw an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderHint {
    Opaque,
    /// Holes are drawn see-through so the material they remove stays visible.
    TransparentMask,
}

/// A placed solid or hole. `geometry` is object-local; `transform` places it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignObject {
    pub id: ObjectId,
    pub solidity: Solidity,
    pub color: Color,
    pub transform: Transform,
    pub geometry: CsgTree,
    /// Evaluated `geometry`, before `transform`.
    #[serde(skip)]
    pub local: Arc<Mesh>,
    /// World-space mesh.
    #[serde(skip)]
    pub baked: Arc<Mesh>,
}

impl PartialEq for DesignObject {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.solidity == other.solidity
            && self.color == other.color
            && self.transform == other.transform
            && self.geometry == other.geometry
    }
}

impl DesignObject {
    /// Evaluate `geometry` and bake it under `transform`.
    pub fn build(
        id: ObjectId,
        geometry: CsgTree,
        transform: Transform,
        solidity: Solidity,
        color: Color,
        tess: &TessellationSpec,
        opts: &BooleanOptions,
    ) -> Result<DesignObject> {
        let local = geometry.evaluate(tess, opts)?;
        Ok(DesignObject::with_local(id, geometry, transform, solidity, color, Arc::new(local)))
    }

    pub fn with_local(
        id: ObjectId,
        geometry: CsgTree,
        transform: Transform,
        solidity: Solidity,
        color: Color,
        local: Arc<Mesh>,
    ) -> DesignObject {
        let baked = Arc::new(transform_mesh(&local, &transform));
        DesignObject {
            id,
            solidity,
            color,
            transform,
            geometry,
            local,
            baked,
        }
    }

    /// Same object under a new pose.
    pub fn with_transform(&self, transform: Transform) -> DesignObject {
        DesignObject::with_local(
            self.id,
            self.geometry.clone(),
            transform,
            self.solidity,
            self.color,
            self.local.clone(),
        )
    }

    /// Freeze the current pose into the geometry so a further world-axis
    /// transform can be applied on top. The baked mesh is unchanged.
    pub fn nested(&self, outer: Transform) -> DesignObject {
        let geometry = CsgTree::Placed {
            transform: self.transform,
            child: Box::new(self.geometry.clone()),
        };
        DesignObject::with_local(self.id, geometry, outer, self.solidity, self.color, self.baked.clone())
    }

    pub fn bounds(&self) -> Box3 {
        Box3::from_points(&self.baked.vertices)
    }

    pub fn block_count(&self) -> usize {
        self.geometry.leaf_count()
    }

    pub fn vertex_count(&self) -> usize {
        self.baked.vertex_count()
    }

    pub fn render_hint(&self) -> RenderHint {
        match self.solidity {
            Solidity::Solid => RenderHint::Opaque,
            Solidity::Hole => RenderHint::TransparentMask,
        }
    }
}
