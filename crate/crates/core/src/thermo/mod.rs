//! Partition functions, pressure brackets, Bowen's parameter, the
//! theta-number and conformal measures of finite (or truncated) systems.
//!
//! All sums run in the log domain. Word weights are products of per-edge
//! weights except for the lower side of single-vertex systems at depth
//! `n >= 2`, which uses the exact derivative of the composed word at the
//! centre of its domain.

mod bowen;
mod measure;
mod subsystem;
mod theta;

pub use bowen::{bowen_dim, DimBracket, BISECTION_MAX_ITER, DEFAULT_DIM_TOL};
pub use measure::{
    gibbs_check, measure_dimension, transfer_eigenmeasure, CylinderMeasure, GibbsRatios,
    InvariantMeasureSpec, MeasureDimension,
};
pub use subsystem::{subsystem_with_dimension, SubsystemResult, TraceStep};
pub use theta::{
    theta_estimate, EdgeGenerator, GenShell, GeometricRatios, PowerLawRatios, ThetaEstimate,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::SupNormStrategy;
use crate::error::{Error, Result};
use crate::gdms::{Gdms, Incidence};
use crate::linalg::{self, log_sum_exp, log_sum_exp_scaled, PERRON_MAX_ITER, PERRON_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
    Mid,
}

/// Per-edge bounds `w_lo <= ||D phi_e||_inf <= w_up`, stored as logs.
#[derive(Debug, Clone, Serialize)]
pub struct WeightTable {
    pub mode: String,
    pub rigorous: bool,
    pub log_lo: Vec<f64>,
    pub log_up: Vec<f64>,
    pub khat: f64,
    pub similarity: bool,
}

impl WeightTable {
    /// Evaluates `strategy` on every edge. The lower weight is raised to the
    /// derivative at the centre of the domain when that is larger.
    pub fn build(sys: &Gdms, strategy: &dyn SupNormStrategy, khat: f64) -> Result<Self> {
        let rows: Vec<Result<(f64, f64)>> = sys
            .edges()
            .par_iter()
            .map(|e| {
                let dom = &sys.vertices()[e.to].region;
                let (lo, up) = e.map.deriv_norm_sup(dom, strategy)?;
                let at_center = e.map.deriv_norm_at(dom.center()).unwrap_or(0.0);
                let lo = if at_center <= up { lo.max(at_center) } else { lo };
                Ok((lo.ln(), up.ln()))
            })
            .collect();
        let mut log_lo = Vec::with_capacity(rows.len());
        let mut log_up = Vec::with_capacity(rows.len());
        for r in rows {
            let (a, b) = r?;
            log_lo.push(a);
            log_up.push(b);
        }
        let similarity = sys.edges().iter().all(|e| e.map.is_similarity());
        Self::from_logs(log_lo, log_up, khat, strategy.name(), strategy.rigorous(), similarity)
    }

    pub fn from_logs(
        log_lo: Vec<f64>,
        log_up: Vec<f64>,
        khat: f64,
        mode: &str,
        rigorous: bool,
        similarity: bool,
    ) -> Result<Self> {
        if log_lo.len() != log_up.len() || log_lo.is_empty() {
            return Err(Error::invalid("weight table needs matching nonempty columns"));
        }
        for (a, b) in log_lo.iter().zip(&log_up) {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::invalid(format!("bad weight bounds ({a}, {b})")));
            }
        }
        if !(khat >= 1.0 && khat.is_finite()) {
            return Err(Error::invalid(format!("distortion estimate must be >= 1, got {khat}")));
        }
        Ok(WeightTable {
            mode: mode.to_string(),
            rigorous,
            log_lo,
            log_up,
            khat,
            similarity,
        })
    }

    /// Exact weights of a similarity system.
    pub fn exact(ratios: &[f64]) -> Result<Self> {
        let logs: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        Self::from_logs(logs.clone(), logs, 1.0, "exact", true, true)
    }

    pub fn len(&self) -> usize {
        self.log_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_lo.is_empty()
    }

    pub fn log_side(&self, side: Side) -> Vec<f64> {
        match side {
            Side::Lower => self.log_lo.clone(),
            Side::Upper => self.log_up.clone(),
            Side::Mid => self.log_mid(),
        }
    }

    /// `log sqrt(w_lo w_up)`.
    pub fn log_mid(&self) -> Vec<f64> {
        self.log_lo
            .iter()
            .zip(&self.log_up)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::from_logs(
            idx.iter().map(|&i| self.log_lo[i]).collect(),
            idx.iter().map(|&i| self.log_up[i]).collect(),
            self.khat,
            &self.mode,
            self.rigorous,
            self.similarity,
        )
    }
}

/// Lower and upper bounds on `P(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct PressureBracket {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    /// Largest word length used on the lower side.
    pub depth: usize,
    pub method: String,
    pub irreducible: bool,
}

/// Pressure evaluation for one system and weight table, with cached word
/// tables.
pub struct PressureEngine<'a> {
    sys: Option<&'a Gdms>,
    weights: WeightTable,
    n_max: usize,
    lower_words: Vec<Vec<f64>>,
    irreducible: bool,
}

impl<'a> PressureEngine<'a> {
    /// `n_max` bounds the word length; depths whose word count exceeds
    /// `budget` are not used for the lower bound.
    pub fn new(sys: &'a Gdms, weights: WeightTable, n_max: usize, budget: u64) -> Result<Self> {
        if weights.len() != sys.edges().len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} edge weights", sys.edges().len()),
                got: format!("{}", weights.len()),
            });
        }
        if n_max == 0 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        let irreducible = sys.finite_irreducibility().is_irreducible();
        let mut lower_words = Vec::new();
        if sys.vertices().len() == 1 && sys.is_maximal() && !weights.similarity {
            for n in 2..=n_max {
                if sys.word_count(n) > budget as f64 {
                    break;
                }
                lower_words.push(word_log_derivs(sys, n)?);
            }
        }
        Ok(PressureEngine {
            sys: Some(sys),
            weights,
            n_max,
            lower_words,
            irreducible,
        })
    }

    /// A full shift on the given weights, with no geometry attached.
    pub fn full_shift(weights: WeightTable) -> Self {
        PressureEngine {
            sys: None,
            weights,
            n_max: 1,
            lower_words: Vec::new(),
            irreducible: true,
        }
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn system(&self) -> Option<&'a Gdms> {
        self.sys
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    fn single_vertex_full(&self) -> bool {
        match self.sys {
            None => true,
            Some(s) => s.vertices().len() == 1 && s.is_maximal(),
        }
    }

    /// `log Z_n(t)` from per-edge weights of the given side, by dynamic
    /// programming over the last edge.
    pub fn log_partition_product(&self, t: f64, n: usize, side: Side) -> f64 {
        let lw = self.weights.log_side(side);
        let Some(sys) = self.sys.filter(|_| !self.single_vertex_full()) else {
            return n as f64 * log_sum_exp_scaled(&lw, t);
        };
        match sys.incidence() {
            Incidence::Maximal => {
                let nv = sys.vertices().len();
                // tv[v]: log of the total weight of words ending at vertex v
                let mut tv = vec![0.0; nv];
                for _ in 0..n {
                    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); nv];
                    for (b, e) in sys.edges().iter().enumerate() {
                        acc[e.to].push(t * lw[b] + tv[e.from]);
                    }
                    tv = acc.iter().map(|v| log_sum_exp(v)).collect();
                }
                log_sum_exp(&tv)
            }
            Incidence::Explicit(_) => {
                let ne = sys.edges().len();
                let mut c: Vec<f64> = (0..ne).map(|b| t * lw[b]).collect();
                for _ in 1..n {
                    c = (0..ne)
                        .map(|b| {
                            let v: Vec<f64> = sys.predecessors(b).iter().map(|&a| c[a]).collect();
                            t * lw[b] + log_sum_exp(&v)
                        })
                        .collect();
                }
                log_sum_exp(&c)
            }
        }
    }

    /// `log Z_n(t)` for the requested side. The lower side of a
    /// single-vertex system uses exact word derivatives when cached.
    pub fn log_partition_sum(&self, t: f64, n: usize, side: Side) -> f64 {
        if side == Side::Lower && n >= 2 {
            if let Some(ws) = self.lower_words.get(n - 2) {
                return log_sum_exp_scaled(ws, t);
            }
        }
        self.log_partition_product(t, n, side)
    }

    /// `(log lambda_lower, log lambda_upper)` of `M_ab = A_ab w(b)^t`.
    fn log_spectral(&self, t: f64, side: Side) -> Result<(f64, f64)> {
        let lw = self.weights.log_side(side);
        let Some(sys) = self.sys.filter(|_| !self.single_vertex_full()) else {
            let l = log_sum_exp_scaled(&lw, t);
            return Ok((l, l));
        };
        let logm: Vec<Vec<f64>> = match sys.incidence() {
            Incidence::Maximal => {
                let nv = sys.vertices().len();
                let mut cells: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); nv]; nv];
                for (b, e) in sys.edges().iter().enumerate() {
                    cells[e.from][e.to].push(t * lw[b]);
                }
                cells
                    .iter()
                    .map(|row| row.iter().map(|c| log_sum_exp(c)).collect())
                    .collect()
            }
            Incidence::Explicit(a) => a
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(b, &on)| if on { t * lw[b] } else { f64::NEG_INFINITY })
                        .collect()
                })
                .collect(),
        };
        let shift = logm.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Ok((f64::NEG_INFINITY, f64::NEG_INFINITY));
        }
        let m: Vec<Vec<f64>> = logm
            .iter()
            .map(|r| r.iter().map(|x| (x - shift).exp()).collect())
            .collect();
        let p = linalg::perron(&m, PERRON_TOL, PERRON_MAX_ITER)?;
        Ok((p.lower.ln() + shift, p.upper.ln() + shift))
    }

    pub fn pressure_upper(&self, t: f64) -> Result<f64> {
        let (_, spec) = self.log_spectral(t, Side::Upper)?;
        let mut best = spec;
        if !self.single_vertex_full() {
            for n in 1..=self.n_max {
                best = best.min(self.log_partition_product(t, n, Side::Upper) / n as f64);
            }
        }
        Ok(best)
    }

    pub fn pressure_lower(&self, t: f64) -> Result<(f64, usize)> {
        let pen = t * self.weights.khat.ln();
        let (spec, _) = self.log_spectral(t, Side::Lower)?;
        let mut best = spec - pen;
        let mut depth = 1;
        for (i, ws) in self.lower_words.iter().enumerate() {
            let n = i + 2;
            let v = (log_sum_exp_scaled(ws, t) - pen) / n as f64;
            if v > best {
                best = v;
            }
            depth = n;
        }
        Ok((best, depth))
    }

    pub fn pressure_bracket(&self, t: f64) -> Result<PressureBracket> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("t must be a nonnegative number, got {t}")));
        }
        let upper = self.pressure_upper(t)?;
        let (lower, depth) = self.pressure_lower(t)?;
        let method = if self.single_vertex_full() {
            if self.lower_words.is_empty() {
                "log-sum"
            } else {
                "log-sum+superadditive"
            }
        } else {
            "spectral"
        };
        Ok(PressureBracket {
            t,
            lower: lower.min(upper),
            upper,
            depth,
            method: method.to_string(),
            irreducible: self.irreducible,
        })
    }
}

/// Log derivatives of all words of length `n` at the centre of their
/// domain, built by prepending edges. Order: by last edge, then by the
/// recursion below.
fn word_log_derivs(sys: &Gdms, n: usize) -> Result<Vec<f64>> {
    fn rec(sys: &Gdms, last: usize, x: &crate::group::GPoint, ld: f64, left: usize, out: &mut Vec<f64>) -> Result<()> {
        if left == 0 {
            out.push(ld);
            return Ok(());
        }
        for &a in sys.predecessors(last) {
            let (y, d) = sys.edges()[a].map.apply_with_deriv(x)?;
            rec(sys, a, &y, ld + d.ln(), left - 1, out)?;
        }
        Ok(())
    }
    let parts: Vec<Result<Vec<f64>>> = (0..sys.edges().len())
        .into_par_iter()
        .map(|e| {
            let edge = &sys.edges()[e];
            let c = sys.vertices()[edge.to].region.center();
            let (x, d) = edge.map.apply_with_deriv(c)?;
            let mut out = Vec::new();
            rec(sys, e, &x, d.ln(), n - 1, &mut out)?;
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// `Z_n(t)` for the chosen side; see [`PressureEngine::log_partition_sum`].
pub fn partition_sum(
    sys: &Gdms,
    weights: &WeightTable,
    t: f64,
    n: usize,
    side: Side,
    budget: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("word length must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be nonnegative"));
    }
    let count = sys.word_count(n);
    if count > budget as f64 {
        return Err(Error::BudgetExceeded {
            what: format!("words of length {n}"),
            estimate: count,
            budget,
        });
    }
    let engine = PressureEngine::new(sys, weights.clone(), n, budget)?;
    Ok(engine.log_partition_sum(t, n, side).exp())
}

/// Convenience wrapper building a one-off engine.
pub fn pressure_bracket(
    sys: &Gdms,
    weights: &WeightTable,
    t: f64,
    n_max: usize,
    budget: u64,
) -> Result<PressureBracket> {
    PressureEngine::new(sys, weights.clone(), n_max, budget)?.pressure_bracket(t)
}
