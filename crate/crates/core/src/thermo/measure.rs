use serde::{Deserialize, Serialize};

use super::{Side, WeightTable};
use crate::error::{Error, Result};
use crate::gdms::{Gdms, Word};
use crate::linalg::{self, log_sum_exp, PERRON_MAX_ITER, PERRON_TOL};

/// Masses of the cylinders `[omega]`, `1 <= |omega| <= depth`, of the
/// conformal measure at parameter `t`.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderMeasure {
    pub t: f64,
    pub depth: usize,
    /// Perron root of `M_ab = A_ab w_mid(b)^t`, an estimate of `e^{P(t)}`.
    pub lambda: f64,
    /// `levels[k]` holds the cylinders of length `k + 1` in lexicographic
    /// order.
    pub levels: Vec<Vec<(Word, f64)>>,
}

impl CylinderMeasure {
    pub fn level(&self, n: usize) -> &[(Word, f64)] {
        &self.levels[n - 1]
    }

    /// Largest `|m([omega]) - sum_b m([omega b])|` over all parents.
    pub fn consistency_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.levels.len() {
            let parents = &self.levels[k - 1];
            let children = &self.levels[k];
            // children are lexicographic, so each parent owns a contiguous run
            let mut j = 0;
            for (w, m) in parents {
                let mut s = 0.0;
                while j < children.len() && children[j].0 .0[..k] == w.0[..] {
                    s += children[j].1;
                    j += 1;
                }
                worst = worst.max((s - m).abs());
            }
        }
        worst
    }
}

/// Conformal measure from the right Perron vector `v` of
/// `M_ab = A_ab w_mid(b)^t` over edges, extended to cylinders by
/// `m([omega]) ~ w_mid(omega)^t v(omega_n)` and normalized per depth.
/// Children then sum to their parent.
pub fn transfer_eigenmeasure(
    sys: &Gdms,
    weights: &WeightTable,
    t: f64,
    depth: usize,
    budget: u64,
) -> Result<CylinderMeasure> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be a nonnegative number, got {t}")));
    }
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    if weights.len() != sys.edges().len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} edge weights", sys.edges().len()),
            got: weights.len().to_string(),
        });
    }
    if let crate::gdms::Irreducibility::Reducible { from, to } = sys.finite_irreducibility() {
        return Err(Error::Reducible(format!(
            "no admissible path from edge '{}' to edge '{}'",
            sys.edges()[from].id,
            sys.edges()[to].id
        )));
    }
    let total: f64 = (1..=depth).map(|n| sys.word_count(n)).sum();
    if total > budget as f64 {
        return Err(Error::BudgetExceeded {
            what: format!("cylinders up to depth {depth}"),
            estimate: total,
            budget,
        });
    }
    let lw = weights.log_mid();
    let ne = lw.len();
    let shift = lw.iter().map(|x| t * x).fold(f64::NEG_INFINITY, f64::max);
    let m: Vec<Vec<f64>> = (0..ne)
        .map(|a| {
            (0..ne)
                .map(|b| {
                    if sys.allowed(a, b) {
                        (t * lw[b] - shift).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let p = linalg::perron(&m, PERRON_TOL, PERRON_MAX_ITER)?;
    let lambda = p.lambda * shift.exp();
    let lv: Vec<f64> = p.vector.iter().map(|v| v.ln()).collect();
    let mut levels = Vec::with_capacity(depth);
    for n in 1..=depth {
        let words: Vec<Word> = sys.admissible_words(n, budget)?.collect();
        let logs: Vec<f64> = words
            .iter()
            .map(|w| t * w.0.iter().map(|&e| lw[e]).sum::<f64>() + lv[*w.0.last().unwrap()])
            .collect();
        let z = log_sum_exp(&logs);
        levels.push(
            words
                .into_iter()
                .zip(logs)
                .map(|(w, l)| (w, (l - z).exp()))
                .collect(),
        );
    }
    Ok(CylinderMeasure {
        t,
        depth,
        lambda,
        levels,
    })
}

/// Extremes of `m([omega]) lambda^|omega| / w(omega)^t` over all stored
/// cylinders, with `w` the product of per-edge weights of the given side.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GibbsRatios {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl GibbsRatios {
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

pub fn gibbs_check(measure: &CylinderMeasure, weights: &WeightTable, side: Side) -> GibbsRatios {
    let lw = weights.log_side(side);
    let ll = measure.lambda.ln();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, level) in measure.levels.iter().enumerate() {
        let n = (k + 1) as f64;
        for (w, m) in level {
            let r = m.ln() + n * ll - measure.t * w.0.iter().map(|&e| lw[e]).sum::<f64>();
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    GibbsRatios {
        min_ratio: lo.exp(),
        max_ratio: hi.exp(),
    }
}

/// A shift-invariant measure on the edge alphabet.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantMeasureSpec {
    Bernoulli(Vec<f64>),
    Markov(Vec<Vec<f64>>),
}

const PROB_TOL: f64 = 1e-9;

fn check_prob_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Validation(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::Validation(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// `-sum p log p` with `0 log 0 = 0`.
fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Entropy, Lyapunov exponent and their ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasureDimension {
    pub entropy: f64,
    pub lyapunov: f64,
    pub dimension: f64,
    pub depth: usize,
}

/// `h_mu / chi_mu` with the entropy in closed form and
/// `chi_mu = -(1/n) sum_{|omega| = n} mu([omega]) log w_mid(omega)`.
pub fn measure_dimension(
    sys: &Gdms,
    weights: &WeightTable,
    mu: &InvariantMeasureSpec,
    depth: usize,
    budget: u64,
) -> Result<MeasureDimension> {
    let ne = sys.edges().len();
    if weights.len() != ne {
        return Err(Error::DimensionMismatch {
            expected: format!("{ne} edge weights"),
            got: weights.len().to_string(),
        });
    }
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    // (initial distribution, transition matrix)
    let (init, trans): (Vec<f64>, Vec<Vec<f64>>) = match mu {
        InvariantMeasureSpec::Bernoulli(p) => {
            if p.len() != ne {
                return Err(Error::DimensionMismatch {
                    expected: format!("{ne} probabilities"),
                    got: p.len().to_string(),
                });
            }
            check_prob_row(p, "Bernoulli vector")?;
            (p.clone(), vec![p.clone(); ne])
        }
        InvariantMeasureSpec::Markov(m) => {
            if m.len() != ne || m.iter().any(|r| r.len() != ne) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{ne}x{ne} transition matrix"),
                    got: format!("{} rows", m.len()),
                });
            }
            for (a, row) in m.iter().enumerate() {
                check_prob_row(row, &format!("row {a} of the transition matrix"))?;
            }
            (linalg::stationary(m)?, m.clone())
        }
    };
    for a in 0..ne {
        if init[a] == 0.0 {
            continue;
        }
        for b in 0..ne {
            if trans[a][b] > 0.0 && init[b] > 0.0 && !sys.allowed(a, b) {
                return Err(Error::Validation(format!(
                    "measure charges the forbidden transition {} -> {}",
                    sys.edges()[a].id,
                    sys.edges()[b].id
                )));
            }
        }
    }
    let h = match mu {
        InvariantMeasureSpec::Bernoulli(p) => entropy(p),
        InvariantMeasureSpec::Markov(_) => init
            .iter()
            .zip(&trans)
            .map(|(pi, row)| pi * entropy(row))
            .sum(),
    };
    let lw = weights.log_mid();
    let mut chi = 0.0;
    for w in sys.admissible_words(depth, budget)? {
        let mut m = init[w.0[0]];
        for pair in w.0.windows(2) {
            m *= trans[pair[0]][pair[1]];
        }
        if m > 0.0 {
            chi -= m * w.0.iter().map(|&e| lw[e]).sum::<f64>();
        }
    }
    chi /= depth as f64;
    if !(chi > 0.0) {
        return Err(Error::NonConvergence(format!(
            "Lyapunov exponent {chi} is not positive"
        )));
    }
    Ok(MeasureDimension {
        entropy: h,
        lyapunov: chi,
        dimension: h / chi,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::Bracketed;
    use crate::gdms::test_systems::*;
    use crate::gdms::Incidence;

    fn two_halves() -> Gdms {
        let g = h1();
        ifs(
            vec![sim(&g, 0.5, [0.5, 0.0, 0.0]), sim(&g, 0.5, [-0.5, 0.0, 0.0])],
            1.0,
            Incidence::Maximal,
        )
    }

    #[test]
    fn symmetric_measure() {
        let sys = two_halves();
        let w = WeightTable::build(&sys, &Bracketed, 1.0).unwrap();
        let m = transfer_eigenmeasure(&sys, &w, 1.0, 5, 1000).unwrap();
        assert!((m.lambda - 1.0).abs() < 1e-12);
        for n in 1..=5 {
            for (_, x) in m.level(n) {
                assert!((x - 0.5f64.powi(n as i32)).abs() < 1e-12);
            }
        }
        let g = gibbs_check(&m, &w, Side::Mid);
        assert!((g.min_ratio - 1.0).abs() < 1e-9 && (g.max_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn golden_children_sum_to_parent() {
        let sys = golden(1.0 / 3.0);
        let w = WeightTable::build(&sys, &Bracketed, 1.0).unwrap();
        let m = transfer_eigenmeasure(&sys, &w, 0.6, 7, 10_000).unwrap();
        assert!(m.consistency_defect() < 1e-9);
        let g = gibbs_check(&m, &w, Side::Mid);
        assert!(g.min_ratio > 0.0 && g.max_ratio.is_finite());
    }

    #[test]
    fn bernoulli_dimensions() {
        let sys = two_halves();
        let w = WeightTable::build(&sys, &Bracketed, 1.0).unwrap();
        let d = measure_dimension(&sys, &w, &InvariantMeasureSpec::Bernoulli(vec![0.5, 0.5]), 6, 1000)
            .unwrap();
        assert!((d.dimension - 1.0).abs() < 1e-12);
        let d = measure_dimension(&sys, &w, &InvariantMeasureSpec::Bernoulli(vec![0.9, 0.1]), 6, 1000)
            .unwrap();
        let want = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln()) / 2f64.ln();
        assert!((d.dimension - want).abs() < 1e-12);
        assert!(measure_dimension(&sys, &w, &InvariantMeasureSpec::Bernoulli(vec![0.5, 0.6]), 2, 100)
            .is_err());
    }

    #[test]
    fn markov_respects_incidence() {
        let sys = golden(1.0 / 3.0);
        let w = WeightTable::build(&sys, &Bracketed, 1.0).unwrap();
        let ok = InvariantMeasureSpec::Markov(vec![vec![0.5, 0.5], vec![1.0, 0.0]]);
        let d = measure_dimension(&sys, &w, &ok, 8, 10_000).unwrap();
        // stationary (2/3, 1/3); entropy (2/3) log 2
        assert!((d.entropy - 2.0 / 3.0 * 2f64.ln()).abs() < 1e-12);
        let chi = 2.0 / 3.0 * 2f64.ln() + 1.0 / 3.0 * 3f64.ln();
        assert!((d.lyapunov - chi).abs() < 1e-9);
        let bad = InvariantMeasureSpec::Markov(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(measure_dimension(&sys, &w, &bad, 2, 100).is_err());
    }
}
