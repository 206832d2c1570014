use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Edge, Gdms, Incidence, ValidationConfig, Vertex};
use crate::conformal::{ChainSpec, ConformalChain, PrimitiveSpec};
use crate::error::{Error, Result};
use crate::group::{GPoint, GroupDescriptor, Region};

pub const SPEC_VERSION: u32 = 1;

fn default_version() -> u32 {
    SPEC_VERSION
}

/// JSON description of a finite system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default = "default_version")]
    pub spec_version: u32,
    pub group: GroupDescriptor,
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub incidence: IncidenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub chain: Vec<PrimitiveSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIncidence", into = "RawIncidence")]
pub enum IncidenceSpec {
    #[default]
    Maximal,
    Matrix(Vec<Vec<u8>>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawIncidence {
    Name(String),
    Matrix { matrix: Vec<Vec<u8>> },
}

impl TryFrom<RawIncidence> for IncidenceSpec {
    type Error = String;

    fn try_from(r: RawIncidence) -> std::result::Result<Self, String> {
        match r {
            RawIncidence::Name(s) if s == "maximal" => Ok(IncidenceSpec::Maximal),
            RawIncidence::Name(s) => Err(format!("unknown incidence '{s}'")),
            RawIncidence::Matrix { matrix } => Ok(IncidenceSpec::Matrix(matrix)),
        }
    }
}

impl From<IncidenceSpec> for RawIncidence {
    fn from(i: IncidenceSpec) -> Self {
        match i {
            IncidenceSpec::Maximal => RawIncidence::Name("maximal".into()),
            IncidenceSpec::Matrix(matrix) => RawIncidence::Matrix { matrix },
        }
    }
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(text)?;
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
        let mut index = HashMap::new();
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vertex id '{}'", v.id)));
            }
            let center = GPoint::from_flat(&group, &v.center)?;
            let region = match v.inner_radius {
                None => Region::Ball {
                    center,
                    radius: v.radius,
                },
                Some(inner) => Region::Annulus {
                    center,
                    inner,
                    outer: v.radius,
                },
            };
            vertices.push(Vertex {
                id: v.id.clone(),
                region,
            });
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("unknown vertex '{id}'")))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut seen = HashMap::new();
        for e in &self.edges {
            if seen.insert(e.id.clone(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate edge id '{}'", e.id)));
            }
            let chain = ChainSpec {
                chain: e.chain.clone(),
            };
            edges.push(Edge {
                id: e.id.clone(),
                from: lookup(&e.from)?,
                to: lookup(&e.to)?,
                map: ConformalChain::from_spec(group.clone(), &chain)?,
            });
        }
        let incidence = match &self.incidence {
            IncidenceSpec::Maximal => Incidence::Maximal,
            IncidenceSpec::Matrix(matrix) => {
                if matrix.iter().flatten().any(|&v| v > 1) {
                    return Err(Error::Validation("incidence entries must be 0 or 1".into()));
                }
                Incidence::Explicit(
                    matrix
                        .iter()
                        .map(|r| r.iter().map(|&v| v == 1).collect())
                        .collect(),
                )
            }
        };
        Gdms::new(group, vertices, edges, incidence, self.contraction, cfg)
    }

    pub fn describe(sys: &Gdms) -> Self {
        let vertices = sys
            .vertices()
            .iter()
            .map(|v| {
                let (radius, inner_radius) = match &v.region {
                    Region::Ball { radius, .. } => (*radius, None),
                    Region::Annulus { inner, outer, .. } => (*outer, Some(*inner)),
                };
                VertexSpec {
                    id: v.id.clone(),
                    center: v.region.center().to_flat(),
                    radius,
                    inner_radius,
                }
            })
            .collect();
        let edges = sys
            .edges()
            .iter()
            .map(|e| EdgeSpec {
                id: e.id.clone(),
                from: sys.vertices()[e.from].id.clone(),
                to: sys.vertices()[e.to].id.clone(),
                chain: e.map.to_spec().chain,
            })
            .collect();
        let incidence = match sys.incidence() {
            Incidence::Maximal => IncidenceSpec::Maximal,
            Incidence::Explicit(m) => IncidenceSpec::Matrix(
                m.iter().map(|r| r.iter().map(|&b| u8::from(b)).collect()).collect(),
            ),
        };
        SystemSpec {
            spec_version: SPEC_VERSION,
            group: GroupDescriptor::describe(sys.group()),
            vertices,
            edges,
            incidence,
            contraction: Some(sys.contraction()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_HALF: &str = r#"{
        "spec_version": 1,
        "group": {"kind": "heis_c", "n": 1},
        "vertices": [{"id": "X", "center": [0, 0, 0], "radius": 1.0}],
        "edges": [
            {"id": "a", "from": "X", "to": "X", "chain": [{"dilate": 0.5}, {"translate": [0.5, 0, 0]}]},
            {"id": "b", "from": "X", "to": "X", "chain": [{"dilate": 0.5}, {"translate": [-0.5, 0, 0]}]}
        ],
        "incidence": "maximal"
    }"#;

    #[test]
    fn parse_and_build() {
        let spec = SystemSpec::from_json(FOUR_HALF).unwrap();
        let sys = spec.build(&ValidationConfig::default()).unwrap();
        assert_eq!(sys.edges().len(), 2);
        assert!(sys.is_maximal());
        let again = SystemSpec::describe(&sys);
        let text = serde_json::to_string(&again).unwrap();
        let sys2 = SystemSpec::from_json(&text)
            .unwrap()
            .build(&ValidationConfig::default())
            .unwrap();
        assert_eq!(sys2.edges().len(), 2);
    }

    #[test]
    fn matrix_incidence_and_errors() {
        let text = FOUR_HALF.replace(r#""maximal""#, r#"{"matrix": [[1, 1], [1, 0]]}"#);
        let sys = SystemSpec::from_json(&text)
            .unwrap()
            .build(&ValidationConfig::default())
            .unwrap();
        assert_eq!(sys.word_count(2), 3.0);
        let bad = FOUR_HALF.replace(r#""to": "X", "chain": [{"dilate": 0.5}, {"translate": [0.5"#, r#""to": "Y", "chain": [{"dilate": 0.5}, {"translate": [0.5"#);
        assert!(SystemSpec::from_json(&bad)
            .unwrap()
            .build(&ValidationConfig::default())
            .is_err());
        let v2 = FOUR_HALF.replace(r#""spec_version": 1"#, r#""spec_version": 2"#);
        assert!(SystemSpec::from_json(&v2).is_err());
    }
}
