use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{pole_error, ConformalChain};
use crate::error::{Error, Result};
use crate::group::Region;
use crate::registry::Registry;

/// Guards the division in bracketed bounds.
pub const EPS_FLOOR: f64 = 1e-12;

/// A way of bounding `sup ||DF||` over a region.
pub trait SupNormStrategy: Send + Sync {
    fn name(&self) -> &str;

    /// `(lower, upper)` with `lower <= upper`.
    fn bounds(&self, chain: &ConformalChain, region: &Region) -> Result<(f64, f64)>;

    /// Whether `lower <= sup <= upper` is guaranteed.
    fn rigorous(&self) -> bool;
}

/// Closed-form bounds from `||DF(p)|| = r_F / d(p, a)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bracketed;

impl SupNormStrategy for Bracketed {
    fn name(&self) -> &str {
        "bracketed"
    }

    fn bounds(&self, chain: &ConformalChain, region: &Region) -> Result<(f64, f64)> {
        let rf = chain.scaling_factor_rf();
        let Some(a) = chain.pole() else {
            return Ok((rf, rf));
        };
        if chain.inversions() > 1 {
            return Err(Error::Unsupported(
                "bracketed sup norms need at most one inversion".into(),
            ));
        }
        let (dmin, dmax) = region.dist_range(chain.group(), a);
        if dmin <= 0.0 {
            return Err(pole_error(dmin));
        }
        let lo = rf / (dmax * dmax);
        let f = dmin.max(EPS_FLOOR);
        Ok((lo, rf / (f * f)))
    }

    fn rigorous(&self) -> bool {
        true
    }
}

/// Maximum over seeded random points of the region. The upper value
/// multiplies it by the observed distortion `1.1 max/min` of the sample.
#[derive(Debug, Clone, Copy)]
pub struct Sampled {
    pub k: usize,
    pub seed: u64,
}

impl Default for Sampled {
    fn default() -> Self {
        Sampled { k: 1000, seed: 0 }
    }
}

impl SupNormStrategy for Sampled {
    fn name(&self) -> &str {
        "sampled"
    }

    fn bounds(&self, chain: &ConformalChain, region: &Region) -> Result<(f64, f64)> {
        if chain.is_similarity() {
            let r = chain.scaling_factor_rf();
            return Ok((r, r));
        }
        let g = chain.group();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut hi: f64 = 0.0;
        let mut lo = f64::INFINITY;
        for p in region.sample(g, &mut rng, self.k.max(2)) {
            let d = chain.deriv_norm_at(&p)?;
            hi = hi.max(d);
            lo = lo.min(d);
        }
        let khat = if hi == lo { 1.0 } else { 1.1 * hi / lo };
        Ok((hi, hi * khat))
    }

    fn rigorous(&self) -> bool {
        false
    }
}

/// The built-in strategies under their command-line names.
pub fn sup_norm_registry() -> Registry<dyn SupNormStrategy> {
    let mut r: Registry<dyn SupNormStrategy> = Registry::new("sup-norm mode");
    r.register("bracketed", Arc::new(Bracketed));
    r.register("sampled", Arc::new(Sampled::default()));
    r
}
