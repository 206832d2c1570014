use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// A group of edges of an infinite system whose natural scale (for
/// instance the norm of a lattice point, or `1/r` for a similarity) lies
/// in `[scale_lo, scale_hi)`. Weights are stored as `(log w_mid, count)`
/// pairs so that edges of equal weight can be merged.
#[derive(Debug, Clone, Serialize)]
pub struct GenShell {
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub log_weights: Vec<f64>,
    pub counts: Vec<f64>,
}

impl GenShell {
    pub fn edge_count(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `log sum_e w_e^t`.
    pub fn log_sum(&self, t: f64) -> f64 {
        let v: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.counts)
            .filter(|(_, c)| **c > 0.0)
            .map(|(lw, c)| t * lw + c.ln())
            .collect();
        log_sum_exp(&v)
    }
}

/// An infinite alphabet enumerated in shells of increasing scale.
pub trait EdgeGenerator: Send + Sync {
    fn name(&self) -> String;

    /// The first `count` shells.
    fn shells(&self, count: usize, budget: u64) -> Result<Vec<GenShell>>;

    /// `(log w_lo, log w_up)` of the first `count` edges, ordered by
    /// nonincreasing weight.
    fn ordered_weights(&self, _count: usize, _budget: u64) -> Result<Vec<(f64, f64)>> {
        Err(Error::Unsupported(format!(
            "generator '{}' does not enumerate single edges",
            self.name()
        )))
    }

    /// Distortion constant used with [`EdgeGenerator::ordered_weights`].
    fn distortion(&self) -> f64 {
        1.0
    }
}

/// Similarities with ratios `r_k = c q^k`, `k >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricRatios {
    pub c: f64,
    pub q: f64,
}

/// Similarities with ratios `r_k = c k^{-p}`, `k >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawRatios {
    pub c: f64,
    pub p: f64,
}

fn check_ratio(r: f64) -> Result<f64> {
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(Error::Validation(format!("generator ratio {r} is not in (0,1)")))
    }
}

impl GeometricRatios {
    pub fn new(c: f64, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0 && c > 0.0 && c * q < 1.0) {
            return Err(Error::Validation(format!("bad geometric generator c={c}, q={q}")));
        }
        Ok(GeometricRatios { c, q })
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.c * self.q.powi(k as i32)
    }
}

impl PowerLawRatios {
    pub fn new(c: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && c > 0.0 && c < 1.0) {
            return Err(Error::Validation(format!("bad power-law generator c={c}, p={p}")));
        }
        Ok(PowerLawRatios { c, p })
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.c * (k as f64).powf(-self.p)
    }
}

fn ensure_budget(count: f64, budget: u64) -> Result<()> {
    if count > budget as f64 {
        return Err(Error::BudgetExceeded {
            what: "generator edges".into(),
            estimate: count,
            budget,
        });
    }
    Ok(())
}

impl EdgeGenerator for GeometricRatios {
    fn name(&self) -> String {
        format!("geometric(c={}, q={})", self.c, self.q)
    }

    /// One edge per shell; scale `1/r_k` with geometric-midpoint bounds.
    fn shells(&self, count: usize, budget: u64) -> Result<Vec<GenShell>> {
        ensure_budget(count as f64, budget)?;
        let step = (1.0 / self.q).sqrt();
        (1..=count)
            .map(|k| {
                let r = check_ratio(self.ratio(k))?;
                Ok(GenShell {
                    scale_lo: 1.0 / r / step,
                    scale_hi: step / r,
                    log_weights: vec![r.ln()],
                    counts: vec![1.0],
                })
            })
            .collect()
    }

    fn ordered_weights(&self, count: usize, budget: u64) -> Result<Vec<(f64, f64)>> {
        ensure_budget(count as f64, budget)?;
        // in logs, since c q^k underflows long before the budget runs out
        let (lc, lq) = (self.c.ln(), self.q.ln());
        Ok((1..=count)
            .map(|k| {
                let l = lc + k as f64 * lq;
                (l, l)
            })
            .collect())
    }
}

impl EdgeGenerator for PowerLawRatios {
    fn name(&self) -> String {
        format!("power(c={}, p={})", self.c, self.p)
    }

    /// Shell `j` holds `k` in `[2^j, 2^{j+1})`.
    fn shells(&self, count: usize, budget: u64) -> Result<Vec<GenShell>> {
        let total = 2f64.powi(count as i32) - 1.0;
        ensure_budget(total, budget)?;
        (0..count)
            .map(|j| {
                let (a, b) = (1usize << j, 1usize << (j + 1));
                let mut lw = Vec::with_capacity(b - a);
                for k in a..b {
                    lw.push(check_ratio(self.ratio(k))?.ln());
                }
                let n = lw.len();
                let scale = |k: f64| k.powf(self.p) / self.c;
                Ok(GenShell {
                    scale_lo: scale(a as f64 - 0.5),
                    scale_hi: scale(b as f64 - 0.5),
                    log_weights: lw,
                    counts: vec![1.0; n],
                })
            })
            .collect()
    }

    fn ordered_weights(&self, count: usize, budget: u64) -> Result<Vec<(f64, f64)>> {
        ensure_budget(count as f64, budget)?;
        let lc = self.c.ln();
        Ok((1..=count)
            .map(|k| {
                let l = lc - self.p * (k as f64).ln();
                (l, l)
            })
            .collect())
    }
}

/// Estimate of the theta-number from the growth of shell sums.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaEstimate {
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Root using all shells.
    pub theta_hat: f64,
    /// Root with the last shell dropped.
    pub theta_prev: f64,
    /// Standard error of the root from the regression residuals.
    pub std_err: f64,
    pub shells: usize,
    pub edges: f64,
    pub scale_max: f64,
}

struct Fit {
    slope: f64,
    se: f64,
}

/// Least squares slope of `log(S_k(t) / dlog sigma_k)` on `log sigma_k`.
fn fit(shells: &[GenShell], t: f64) -> Fit {
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .map(|s| {
            let x = 0.5 * (s.scale_lo.ln() + s.scale_hi.ln());
            let y = s.log_sum(t) - (s.scale_hi / s.scale_lo).ln().ln();
            (x, y)
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = if pts.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Fit { slope, se }
}

/// Zero of the (decreasing) fitted slope in `t >= 0`.
fn slope_root(shells: &[GenShell]) -> Result<f64> {
    let f = |t: f64| fit(shells, t).slope;
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut b = 1.0;
    while f(b) > 0.0 {
        b *= 2.0;
        if b > 1e6 {
            return Err(Error::NonConvergence("shell sums do not decay".into()));
        }
    }
    let mut a = 0.0;
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Fits the tail exponent of the shell sums `S_k(t)` and returns the `t`
/// at which the fitted density of `sum_e w_e^t` per unit `log sigma`
/// stops growing. The bracket spans the roots obtained with and without
/// the last shell, widened by two standard errors.
pub fn theta_estimate(gen: &dyn EdgeGenerator, count: usize, budget: u64) -> Result<ThetaEstimate> {
    let all = gen.shells(count, budget)?;
    let shells: Vec<GenShell> = all.into_iter().filter(|s| s.edge_count() > 0.0).collect();
    if shells.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "theta regression needs at least 4 nonempty shells, got {}",
            shells.len()
        )));
    }
    if shells.len() < 6 {
        warn!("theta regression on only {} shells", shells.len());
    }
    let hat = slope_root(&shells)?;
    let prev = slope_root(&shells[..shells.len() - 1])?;
    let se = {
        let f0 = fit(&shells, hat);
        let h = 1e-4;
        let d = (fit(&shells, hat + h).slope - fit(&shells, (hat - h).max(0.0)).slope)
            / (hat + h - (hat - h).max(0.0));
        if d < 0.0 {
            f0.se / -d
        } else {
            0.0
        }
    };
    let lo = (hat.min(prev) - 2.0 * se).max(0.0);
    let hi = hat.max(prev) + 2.0 * se;
    Ok(ThetaEstimate {
        theta_lo: lo,
        theta_hi: hi,
        theta_hat: hat,
        theta_prev: prev,
        std_err: se,
        shells: shells.len(),
        edges: shells.iter().map(GenShell::edge_count).sum(),
        scale_max: shells.last().map_or(0.0, |s| s.scale_hi),
    })
}
