use std::sync::Arc;

use log::info;
use serde::Serialize;

use crate::conformal::{ConformalChain, Primitive};
use crate::error::{Error, Result};
use crate::gdms::{Edge, Gdms, Incidence, ValidationConfig, Vertex};
use crate::group::{GPoint, GroupSpec, IwasawaKind, Region};
use crate::thermo::{EdgeGenerator, GenShell};

/// Continued fractions `phi_gamma = J o l_gamma` on a complex Heisenberg
/// group, over lattice points with `||gamma|| >= 5/2 + epsilon`.
#[derive(Debug, Clone, Serialize)]
pub struct CfSystemParams {
    pub epsilon: f64,
    /// Truncation radius: only `||gamma|| <= radius` is kept.
    pub radius: f64,
}

impl CfSystemParams {
    pub fn delta(&self) -> f64 {
        2.5 + self.epsilon
    }

    /// Uniform contraction bound `1 / (Delta - 1/2)^2`.
    pub fn contraction(&self) -> f64 {
        (self.delta() - 0.5).powi(-2)
    }

    fn check(&self, g: &GroupSpec) -> Result<()> {
        if !matches!(g.kind(), IwasawaKind::ComplexHeisenberg(_)) {
            return Err(Error::Unsupported(
                "continued fractions need a complex Heisenberg group".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.radius > self.delta() && self.radius.is_finite()) {
            return Err(Error::Validation(format!(
                "truncation radius {} must exceed Delta = {}",
                self.radius,
                self.delta()
            )));
        }
        Ok(())
    }
}

fn lattice_id(z: &[i64], t: &[i64]) -> String {
    let f = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
    format!("g({};{})", f(z), f(t))
}

/// The truncated system on `X = closed ball(o, 1/2)`. Edge order is the
/// lexicographic `(z, t)` order of the lattice.
pub fn build_cf_system(
    group: Arc<GroupSpec>,
    params: &CfSystemParams,
    cfg: &ValidationConfig,
    budget: u64,
) -> Result<Gdms> {
    params.check(&group)?;
    // closed at the truncation radius; norms of lattice points are
    // fourth roots of integers, so a relative nudge is enough
    let hi = params.radius * (1.0 + 1e-12);
    let shell = group.lattice_shell(params.delta(), hi, budget as f64)?;
    let edges: Vec<Edge> = shell
        .map(|gam| {
            let id = lattice_id(&gam.z, &gam.t);
            let map = ConformalChain::new(
                group.clone(),
                vec![Primitive::Translate(gam.to_point()), Primitive::Invert],
            )?;
            Ok(Edge {
                id,
                from: 0,
                to: 0,
                map,
            })
        })
        .collect::<Result<_>>()?;
    if edges.len() as f64 > budget as f64 {
        return Err(Error::BudgetExceeded {
            what: "continued fraction alphabet".into(),
            estimate: edges.len() as f64,
            budget,
        });
    }
    info!("continued fraction system with {} edges", edges.len());
    let vertex = Vertex {
        id: "X".into(),
        region: Region::ball(GPoint::origin(&group), 0.5),
    };
    Ok(Gdms::new(
        group,
        vec![vertex],
        edges,
        Incidence::Maximal,
        Some(params.contraction()),
        cfg,
    )?
    .with_truncation(params.radius))
}

/// `(log w_lo, log w_up)` of `phi_gamma` on the ball of radius 1/2, for
/// `rho = ||gamma||`: the derivative `1/d(p, gamma^{-1})^2` ranges over
/// `[1/(rho + 1/2)^2, 1/(rho - 1/2)^2]` and equals `1/rho^2` at `o`.
pub fn cf_log_weights(rho: f64) -> (f64, f64) {
    (-2.0 * rho.ln(), -2.0 * (rho - 0.5).ln())
}

/// Shell generator for the infinite continued fraction alphabet, natural
/// scale `||gamma||`. Shells are geometric between `Delta` and `r_max`.
pub struct CfGenerator {
    pub group: Arc<GroupSpec>,
    pub params: CfSystemParams,
    /// Histogram bins per shell.
    pub resolution: usize,
}

impl CfGenerator {
    pub fn new(group: Arc<GroupSpec>, params: CfSystemParams) -> Result<Self> {
        params.check(&group)?;
        Ok(CfGenerator {
            group,
            params,
            resolution: 256,
        })
    }
}

impl EdgeGenerator for CfGenerator {
    fn name(&self) -> String {
        format!("cf(epsilon={}, r_max={})", self.params.epsilon, self.params.radius)
    }

    fn shells(&self, count: usize, budget: u64) -> Result<Vec<GenShell>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let (lo, hi) = (self.params.delta(), self.params.radius);
        let nb = count * self.resolution;
        let hist = self.group.lattice_norm_histogram(lo, hi, nb, budget as f64)?;
        let step = (hi / lo).ln() / nb as f64;
        let shells = (0..count)
            .map(|k| {
                let mut lw = Vec::new();
                let mut counts = Vec::new();
                for i in k * self.resolution..(k + 1) * self.resolution {
                    if hist[i] > 0 {
                        let rho = lo * ((i as f64 + 0.5) * step).exp();
                        // derivative at o; the series defining theta is sum ||gamma||^{-2t}
                        lw.push(cf_log_weights(rho).0);
                        counts.push(hist[i] as f64);
                    }
                }
                GenShell {
                    scale_lo: lo * ((k * self.resolution) as f64 * step).exp(),
                    scale_hi: lo * (((k + 1) * self.resolution) as f64 * step).exp(),
                    log_weights: lw,
                    counts,
                }
            })
            .collect();
        Ok(shells)
    }

    /// Lattice points by increasing norm, capped at the truncation radius.
    /// The scanned box is about eight times the number of points it holds,
    /// so it may use up to `64 * budget` cells.
    fn ordered_weights(&self, count: usize, budget: u64) -> Result<Vec<(f64, f64)>> {
        let lo = self.params.delta();
        let cap = self.params.radius * (1.0 + 1e-12);
        let mut hi = (2.0 * lo).min(cap);
        loop {
            let shell = self.group.lattice_shell(lo, hi, 64.0 * budget as f64)?;
            let mut norms: Vec<f64> = shell.map(|g| g.norm4().sqrt().sqrt()).collect();
            if norms.len() >= count || hi >= cap {
                norms.sort_by(f64::total_cmp);
                norms.truncate(count);
                return Ok(norms.into_iter().map(cf_log_weights).collect());
            }
            hi = (1.5 * hi).min(cap);
        }
    }

    /// Single-map ratio `((rho + 1/2) / (rho - 1/2))^2` at `rho = Delta`.
    fn distortion(&self) -> f64 {
        let d = self.params.delta();
        ((d + 0.5) / (d - 0.5)).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::Bracketed;
    use crate::thermo::WeightTable;

    fn h1() -> Arc<GroupSpec> {
        Arc::new(GroupSpec::heisenberg(1).unwrap())
    }

    #[test]
    fn alphabet_and_weights() {
        let g = h1();
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 6.0,
        };
        let sys = build_cf_system(g.clone(), &p, &ValidationConfig::default(), 1 << 24).unwrap();
        let want = g.lattice_shell(3.0, 6.0 + 1e-9, 1e9).unwrap().count();
        assert_eq!(sys.edges().len(), want);
        assert_eq!(sys.truncation(), Some(6.0));
        let w = WeightTable::build(&sys, &Bracketed, 1.0).unwrap();
        for (i, e) in sys.edges().iter().enumerate() {
            let rho = g.norm(&e.map.pole().unwrap().clone());
            let (a, b) = cf_log_weights(rho);
            assert!((w.log_up[i] - b).abs() < 1e-12);
            assert!((w.log_lo[i] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn images_stay_inside() {
        use rand::SeedableRng;
        let g = h1();
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 4.0,
        };
        let sys = build_cf_system(g.clone(), &p, &ValidationConfig::default(), 1 << 24).unwrap();
        let ball = Region::ball(GPoint::origin(&g), 0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts = ball.sample(&g, &mut rng, 1000);
        for e in sys.edges() {
            for q in &pts {
                let x = e.map.apply(q).unwrap();
                assert!(g.norm(&x) <= 1.0 / (2.0 + p.epsilon) + 1e-12);
            }
        }
    }

    #[test]
    fn pointwise_derivative() {
        let g = h1();
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 4.0,
        };
        let sys = build_cf_system(g.clone(), &p, &ValidationConfig::default(), 1 << 24).unwrap();
        let q = GPoint::new(&[0.1, -0.2], &[0.05]);
        for e in sys.edges() {
            let gam = e.map.pole().map(|a| g.inv(a).unwrap()).unwrap();
            let d = g.norm(&g.mul(&gam, &q).unwrap());
            let want = 1.0 / (d * d);
            assert!((e.map.deriv_norm_at(&q).unwrap() - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn bad_parameters() {
        let g = h1();
        let cfg = ValidationConfig::default();
        let p = CfSystemParams {
            epsilon: -0.1,
            radius: 6.0,
        };
        assert!(build_cf_system(g.clone(), &p, &cfg, 1 << 20).is_err());
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 3.0,
        };
        assert!(build_cf_system(g.clone(), &p, &cfg, 1 << 20).is_err());
        let q = Arc::new(GroupSpec::quaternionic_heisenberg(1).unwrap());
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 6.0,
        };
        assert!(matches!(
            build_cf_system(q, &p, &cfg, 1 << 20),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ordered_weights_follow_the_alphabet() {
        let p = CfSystemParams {
            epsilon: 0.5,
            radius: 12.0,
        };
        let gen = CfGenerator::new(h1(), p.clone()).unwrap();
        let sys = build_cf_system(h1(), &p, &ValidationConfig::default(), 1 << 24).unwrap();
        let n = sys.edges().len();
        let all = gen.ordered_weights(usize::MAX, 1 << 24).unwrap();
        assert_eq!(all.len(), n);
        let few = gen.ordered_weights(50, 1 << 24).unwrap();
        assert_eq!(few[..], all[..50]);
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1 && w[0].0 < w[0].1));
    }
}
