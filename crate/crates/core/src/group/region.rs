use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GPoint, GroupSpec};
use crate::error::{Error, Result};

/// A compact region: a closed gauge ball or a closed gauge annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Ball { center: GPoint, radius: f64 },
    Annulus { center: GPoint, inner: f64, outer: f64 },
}

impl Region {
    pub fn ball(center: GPoint, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn center(&self) -> &GPoint {
        match self {
            Region::Ball { center, .. } | Region::Annulus { center, .. } => center,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Annulus { outer, .. } => *outer,
        }
    }

    fn inner_radius(&self) -> f64 {
        match self {
            Region::Ball { .. } => 0.0,
            Region::Annulus { inner, .. } => *inner,
        }
    }

    pub fn validate(&self, g: &GroupSpec) -> Result<()> {
        g.check(self.center())?;
        let (lo, hi) = (self.inner_radius(), self.outer_radius());
        if !(hi.is_finite() && hi > 0.0 && lo >= 0.0 && lo < hi) {
            return Err(Error::invalid(format!("bad region radii ({lo}, {hi})")));
        }
        if !self.center().is_finite() {
            return Err(Error::invalid("region center is not finite"));
        }
        Ok(())
    }

    /// Upper bound on the gauge diameter.
    pub fn diam(&self) -> f64 {
        2.0 * self.outer_radius()
    }

    pub fn contains(&self, g: &GroupSpec, p: &GPoint, tol: f64) -> bool {
        let d = g.dist(self.center(), p);
        d <= self.outer_radius() + tol && d >= self.inner_radius() - tol
    }

    /// Bounds `(min, max)` on `d(a, p)` over points `p` of the region.
    pub fn dist_range(&self, g: &GroupSpec, a: &GPoint) -> (f64, f64) {
        let d = g.dist(self.center(), a);
        let lo = (d - self.outer_radius()).max(self.inner_radius() - d).max(0.0);
        (lo, d + self.outer_radius())
    }

    /// Random points of the region; every other point is pushed radially
    /// onto the boundary, where sup norms of contractions usually sit.
    pub fn sample<R: Rng>(&self, g: &GroupSpec, rng: &mut R, n: usize) -> Vec<GPoint> {
        let (lo, hi) = (self.inner_radius(), self.outer_radius());
        let c = self.center();
        let mut out = Vec::with_capacity(n);
        let mut raw = GPoint::origin(g);
        while out.len() < n {
            let nrm = loop {
                for v in raw.z.iter_mut() {
                    *v = rng.gen_range(-hi..=hi);
                }
                for v in raw.t.iter_mut() {
                    *v = rng.gen_range(-hi * hi..=hi * hi);
                }
                let nrm = g.norm(&raw);
                if nrm <= hi && nrm >= lo && nrm > 0.0 {
                    break nrm;
                }
            };
            let q = if out.len() % 2 == 1 {
                let target = if lo > 0.0 && out.len() % 4 == 3 { lo } else { hi };
                g.dilate_raw(target / nrm, &raw)
            } else {
                raw.clone()
            };
            out.push(g.mul_raw(c, &q));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_samples_are_inside() {
        let g = GroupSpec::heisenberg(1).unwrap();
        let r = Region::ball(GPoint::new(&[1.0, -2.0], &[0.5]), 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = r.sample(&g, &mut rng, 500);
        assert_eq!(pts.len(), 500);
        for p in &pts {
            assert!(r.contains(&g, p, 1e-12));
        }
        let on_boundary = pts
            .iter()
            .filter(|p| (g.dist(r.center(), p) - 0.7).abs() < 1e-12)
            .count();
        assert_eq!(on_boundary, 250);
    }

    #[test]
    fn annulus_samples_and_distance() {
        let g = GroupSpec::heisenberg(1).unwrap();
        let r = Region::Annulus {
            center: GPoint::origin(&g),
            inner: 0.5,
            outer: 2.0,
        };
        r.validate(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in r.sample(&g, &mut rng, 400) {
            assert!(r.contains(&g, &p, 1e-12));
        }
        let (lo, hi) = r.dist_range(&g, &GPoint::origin(&g));
        assert_eq!((lo, hi), (0.5, 2.0));
    }

    #[test]
    fn bad_radii_rejected() {
        let g = GroupSpec::heisenberg(1).unwrap();
        assert!(Region::ball(GPoint::origin(&g), 0.0).validate(&g).is_err());
        assert!(Region::ball(GPoint::origin(&g), f64::INFINITY).validate(&g).is_err());
    }
}
