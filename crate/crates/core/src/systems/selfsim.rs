use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalChain, Primitive, Rotation};
use crate::error::{Error, Result};
use crate::gdms::{Edge, Gdms, Incidence, ValidationConfig, Vertex, SPEC_VERSION};
use crate::group::{GPoint, GroupDescriptor, GroupSpec, Region};

/// `x -> b * R(delta_r(x))`.
#[derive(Debug, Clone)]
pub struct SimilarityMap {
    pub translate: GPoint,
    pub scale: f64,
    pub rotation: Option<Rotation>,
}

impl SimilarityMap {
    pub fn chain(&self, group: &Arc<GroupSpec>) -> Result<ConformalChain> {
        let mut prims = Vec::with_capacity(3);
        if let Some(rot) = &self.rotation {
            prims.push(Primitive::Rotate(rot.clone()));
        }
        prims.push(Primitive::Dilate(self.scale));
        prims.push(Primitive::Translate(self.translate.clone()));
        ConformalChain::new(group.clone(), prims)
    }
}

/// Smallest ball about `o` mapped into itself by every map:
/// `||b|| + r R <= R` for each `(b, r)`.
pub fn invariant_radius(group: &GroupSpec, maps: &[SimilarityMap]) -> f64 {
    let r = maps
        .iter()
        .map(|m| group.norm(&m.translate) / (1.0 - m.scale))
        .fold(0.0, f64::max);
    if r > 0.0 {
        r * 1.000001
    } else {
        1.0
    }
}

/// Maximal single-vertex IFS of similarities on a ball about `o`.
pub fn build_self_similar(group: Arc<GroupSpec>, maps: &[SimilarityMap], cfg: &ValidationConfig) -> Result<Gdms> {
    if maps.is_empty() {
        return Err(Error::Validation("a self-similar system needs at least one map".into()));
    }
    for (i, m) in maps.iter().enumerate() {
        if !(m.scale > 0.0 && m.scale < 1.0) {
            return Err(Error::Validation(format!(
                "map {} has scale {} outside (0, 1)",
                i + 1,
                m.scale
            )));
        }
        group.check(&m.translate)?;
    }
    let radius = invariant_radius(&group, maps);
    let edges = maps
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(Edge {
                id: format!("{}", i + 1),
                from: 0,
                to: 0,
                map: m.chain(&group)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let smax = maps.iter().map(|m| m.scale).fold(0.0, f64::max);
    let vertex = Vertex {
        id: "X".into(),
        region: Region::ball(GPoint::origin(&group), radius),
    };
    Gdms::new(group, vec![vertex], edges, Incidence::Maximal, Some(smax), cfg)
}

/// JSON form of a self-similar system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoranSpec {
    #[serde(default = "version")]
    pub spec_version: u32,
    pub group: GroupDescriptor,
    pub maps: Vec<MoranMapSpec>,
}

fn version() -> u32 {
    SPEC_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoranMapSpec {
    /// Flat coordinates `(z; t)`.
    pub translate: Vec<f64>,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotate_theta: Option<f64>,
}

impl MoranSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MoranSpec = serde_json::from_str(text)?;
        if spec.spec_version != SPEC_VERSION {
            return Err(Error::Validation(format!(
                "unsupported spec_version {} (expected {SPEC_VERSION})",
                spec.spec_version
            )));
        }
        Ok(spec)
    }

    pub fn build(&self, cfg: &ValidationConfig) -> Result<Gdms> {
        let group = Arc::new(self.group.build()?);
        let maps = self
            .maps
            .iter()
            .map(|m| {
                Ok(SimilarityMap {
                    translate: GPoint::from_flat(&group, &m.translate)?,
                    scale: m.scale,
                    rotation: m.rotate_theta.map(Rotation::Angle),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        build_self_similar(group, &maps, cfg)
    }
}
