//! Builders for the standard example systems and a registry of named
//! presets used by the command line.

mod cantor;
mod cf;
mod selfsim;

pub use cantor::{
    build_cantor_generic, cantor_map, pack_sphere, packing_gaps, PackingEffort, shell_count_rate, zeta, CantorGenerator,
    CantorShellParams, CantorShells,
};
pub use cf::{build_cf_system, cf_log_weights, CfGenerator, CfSystemParams};
pub use selfsim::{build_self_similar, invariant_radius, MoranMapSpec, MoranSpec, SimilarityMap};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gdms::{Gdms, SystemSpec, ValidationConfig};
use crate::group::GroupSpec;
use crate::registry::Registry;
use crate::thermo::{EdgeGenerator, GeometricRatios, PowerLawRatios};

/// Everything a preset may read; unused fields are ignored.
#[derive(Debug, Clone)]
pub struct PresetParams {
    pub group: Arc<GroupSpec>,
    pub epsilon: Option<f64>,
    pub radius: Option<f64>,
    pub shells: Option<usize>,
    /// Contents of a JSON system file.
    pub spec: Option<String>,
    pub seed: u64,
    pub budget: u64,
    pub validation: ValidationConfig,
    /// Leading ratio `c` of the ratio generators.
    pub ratio: Option<f64>,
    /// `q` of the geometric generator or `p` of the power-law one.
    pub exponent: Option<f64>,
}

impl PresetParams {
    pub fn new(group: Arc<GroupSpec>, seed: u64, budget: u64) -> Self {
        PresetParams {
            group,
            epsilon: None,
            radius: None,
            shells: None,
            spec: None,
            seed,
            budget,
            validation: ValidationConfig::default(),
            ratio: None,
            exponent: None,
        }
    }

    fn need<T: Copy>(v: Option<T>, what: &str, preset: &str) -> Result<T> {
        v.ok_or_else(|| Error::invalid(format!("preset '{preset}' needs --{what}")))
    }

    fn spec_text(&self, preset: &str) -> Result<&str> {
        self.spec
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("preset '{preset}' needs --spec")))
    }
}

/// A named way to obtain a finite system and, for infinite families, an
/// edge generator.
pub trait SystemPreset: Send + Sync {
    fn describe(&self) -> &'static str;

    fn system(&self, p: &PresetParams) -> Result<Gdms>;

    fn generator(&self, _p: &PresetParams) -> Result<Box<dyn EdgeGenerator>> {
        Err(Error::Unsupported(format!(
            "'{}' is a finite system without an edge generator",
            self.describe()
        )))
    }
}

struct CfPreset;
struct CantorPreset;
struct MoranPreset;
struct SpecPreset;
struct GeometricPreset;
struct PowerPreset;

impl CfPreset {
    fn params(p: &PresetParams) -> Result<CfSystemParams> {
        Ok(CfSystemParams {
            epsilon: p.epsilon.unwrap_or(0.5),
            radius: PresetParams::need(p.radius, "radius", "cf")?,
        })
    }
}

impl SystemPreset for CfPreset {
    fn describe(&self) -> &'static str {
        "continued fractions on a complex Heisenberg group"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        build_cf_system(p.group.clone(), &Self::params(p)?, &p.validation, p.budget)
    }

    fn generator(&self, p: &PresetParams) -> Result<Box<dyn EdgeGenerator>> {
        Ok(Box::new(CfGenerator::new(p.group.clone(), Self::params(p)?)?))
    }
}

impl SystemPreset for CantorPreset {
    fn describe(&self) -> &'static str {
        "conformal Cantor set from packed gauge spheres"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        let params = CantorShellParams {
            epsilon: PresetParams::need(p.epsilon, "epsilon", "cantor")?,
            shells: PresetParams::need(p.shells, "shells", "cantor")?,
            seed: p.seed,
            effort: PackingEffort::default(),
        };
        CantorShells::build(p.group.clone(), &params, p.budget)?.system(&p.validation)
    }

    fn generator(&self, p: &PresetParams) -> Result<Box<dyn EdgeGenerator>> {
        Ok(Box::new(CantorGenerator {
            group: p.group.clone(),
            epsilon: PresetParams::need(p.epsilon, "epsilon", "cantor")?,
            seed: p.seed,
            effort: PackingEffort::default(),
        }))
    }
}

impl SystemPreset for MoranPreset {
    fn describe(&self) -> &'static str {
        "self-similar system from a JSON list of similarities"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        MoranSpec::from_json(p.spec_text("moran")?)?.build(&p.validation)
    }
}

impl SystemPreset for SpecPreset {
    fn describe(&self) -> &'static str {
        "system from a full JSON description"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        SystemSpec::from_json(p.spec_text("gdms")?)?.build(&p.validation)
    }
}

/// Finite truncation of a ratio generator as a self-similar system with
/// maps spread along the first horizontal axis.
fn truncated_ratios(gen: &dyn EdgeGenerator, p: &PresetParams) -> Result<Gdms> {
    let n = p.shells.unwrap_or(8);
    let w = gen.ordered_weights(n, p.budget)?;
    let maps: Vec<SimilarityMap> = w
        .iter()
        .enumerate()
        .map(|(k, (lo, _))| {
            let mut z = vec![0.0; p.group.m1()];
            z[0] = 4.0 * k as f64;
            SimilarityMap {
                translate: crate::group::GPoint::new(&z, &vec![0.0; p.group.m2()]),
                scale: lo.exp(),
                rotation: None,
            }
        })
        .collect();
    let mut cfg = p.validation.clone();
    cfg.check_disjoint = false;
    build_self_similar(p.group.clone(), &maps, &cfg)
}

impl GeometricPreset {
    fn gen(p: &PresetParams) -> Result<GeometricRatios> {
        GeometricRatios::new(p.ratio.unwrap_or(0.5), p.exponent.unwrap_or(0.5))
    }
}

impl SystemPreset for GeometricPreset {
    fn describe(&self) -> &'static str {
        "similarities with ratios c q^k"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        truncated_ratios(&Self::gen(p)?, p)
    }

    fn generator(&self, p: &PresetParams) -> Result<Box<dyn EdgeGenerator>> {
        Ok(Box::new(Self::gen(p)?))
    }
}

impl PowerPreset {
    fn gen(p: &PresetParams) -> Result<PowerLawRatios> {
        PowerLawRatios::new(p.ratio.unwrap_or(0.5), p.exponent.unwrap_or(2.0))
    }
}

impl SystemPreset for PowerPreset {
    fn describe(&self) -> &'static str {
        "similarities with ratios c k^-p"
    }

    fn system(&self, p: &PresetParams) -> Result<Gdms> {
        truncated_ratios(&Self::gen(p)?, p)
    }

    fn generator(&self, p: &PresetParams) -> Result<Box<dyn EdgeGenerator>> {
        Ok(Box::new(Self::gen(p)?))
    }
}

pub fn preset_registry() -> Registry<dyn SystemPreset> {
    let mut r: Registry<dyn SystemPreset> = Registry::new("system");
    r.register("cf", Arc::new(CfPreset))
        .register("cantor", Arc::new(CantorPreset))
        .register("moran", Arc::new(MoranPreset))
        .register("gdms", Arc::new(SpecPreset))
        .register("geometric", Arc::new(GeometricPreset))
        .register("power", Arc::new(PowerPreset));
    r
}
