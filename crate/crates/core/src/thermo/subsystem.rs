use serde::Serialize;

use super::{bowen_dim, DimBracket, EdgeGenerator, PressureEngine, WeightTable};
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// One accepted edge of the greedy construction.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub edge: usize,
    pub size: usize,
    pub h_lo: f64,
    pub h_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsystemResult {
    /// Indices into the generator's ordering, increasing.
    pub edges: Vec<usize>,
    pub bracket: DimBracket,
    pub trace: Vec<TraceStep>,
    /// Set when the candidate pool ran out before the target was met.
    pub partial: bool,
    pub candidates_scanned: usize,
}

fn bracket_of(weights: &WeightTable, idx: &[usize], q: f64, tol: f64) -> Result<DimBracket> {
    let engine = PressureEngine::full_shift(weights.subset(idx)?);
    bowen_dim(&engine, q, tol)
}

/// Greedy subsystem of dimension close to `t_target`: starting from the
/// first edge, scans candidates in order and keeps each one whose addition
/// leaves the upper pressure at `t_target` negative. Stops once the lower
/// pressure at `t_target - tol` is nonnegative, i.e. the dimension has
/// reached the target within `tol`.
pub fn subsystem_with_dimension(
    gen: &dyn EdgeGenerator,
    t_target: f64,
    tol: f64,
    q: f64,
    max_edges: usize,
) -> Result<SubsystemResult> {
    if !(t_target >= 0.0 && t_target.is_finite()) {
        return Err(Error::invalid(format!("target must be nonnegative, got {t_target}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let pool = gen.ordered_weights(max_edges, max_edges as u64)?;
    if pool.is_empty() {
        return Err(Error::InsufficientData("generator produced no edges".into()));
    }
    let (lo, up): (Vec<f64>, Vec<f64>) = pool.iter().copied().unzip();
    let khat = gen.distortion();
    let weights = WeightTable::from_logs(lo, up, khat, "generator", true, khat == 1.0)?;
    let pen = khat.ln();
    let t_low = (t_target - tol).max(0.0);
    // running log sums over the chosen set
    let mut s_up = t_target * weights.log_up[0];
    let mut s_lo = t_low * weights.log_lo[0] - t_low * pen;
    let mut edges = vec![0];
    let first = bracket_of(&weights, &edges, q, tol)?;
    let mut trace = vec![TraceStep {
        edge: 0,
        size: 1,
        h_lo: first.h_lo,
        h_hi: first.h_hi,
    }];
    let done = |s_lo: f64| t_target <= tol || s_lo >= 0.0;
    let mut scanned = 1;
    for k in 1..pool.len() {
        if done(s_lo) {
            break;
        }
        scanned = k + 1;
        let cand = log_sum_exp(&[s_up, t_target * weights.log_up[k]]);
        if cand < 0.0 {
            s_up = cand;
            s_lo = log_sum_exp(&[s_lo + t_low * pen, t_low * weights.log_lo[k]]) - t_low * pen;
            edges.push(k);
            let b = bracket_of(&weights, &edges, q, tol)?;
            trace.push(TraceStep {
                edge: k,
                size: edges.len(),
                h_lo: b.h_lo,
                h_hi: b.h_hi,
            });
        }
    }
    let partial = !done(s_lo);
    let bracket = bracket_of(&weights, &edges, q, tol)?;
    Ok(SubsystemResult {
        edges,
        bracket,
        trace,
        partial,
        candidates_scanned: scanned,
    })
}
