use log::info;
use serde::Serialize;

use super::PressureEngine;
use crate::error::{Error, Result};

pub const DEFAULT_DIM_TOL: f64 = 1e-6;
pub const BISECTION_MAX_ITER: usize = 200;

/// Bracket `[h_lo, h_hi]` on Bowen's parameter with
/// `P_upper(h_hi) <= 0 <= P_lower(h_lo)` checked by the last evaluations.
#[derive(Debug, Clone, Serialize)]
pub struct DimBracket {
    pub h_lo: f64,
    pub h_hi: f64,
    pub iterations: usize,
    pub tol: f64,
    /// Width beyond `tol` caused by the gap between the pressure bounds.
    pub slack: f64,
    pub p_upper_at_hi: f64,
    pub p_lower_at_lo: f64,
    /// Right end of the initial search interval.
    pub search_max: f64,
}

impl DimBracket {
    pub fn width(&self) -> f64 {
        self.h_hi - self.h_lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.h_lo + self.h_hi)
    }

    pub fn contains(&self, h: f64) -> bool {
        self.h_lo <= h && h <= self.h_hi
    }
}

/// Bisects `f` (nonincreasing) for its sign change in `[a, b]` with
/// `f(a) > 0 >= f(b)`, returning the final `(a, b, f(a), f(b), steps)`.
fn bisect<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Result<(f64, f64, f64, f64, usize)> {
    let mut steps = 0;
    while b - a > tol {
        if steps >= BISECTION_MAX_ITER {
            return Err(Error::NonConvergence(format!(
                "bisection did not reach width {tol} in {BISECTION_MAX_ITER} steps"
            )));
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm > 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        steps += 1;
    }
    Ok((a, b, fa, fb, steps))
}

/// Bowen's parameter by bisection on the upper and lower pressure bounds,
/// each to `tol / 4`. The search starts on `[0, Q]` and doubles the right
/// end while the upper pressure is still positive.
pub fn bowen_dim(engine: &PressureEngine<'_>, q: f64, tol: f64) -> Result<DimBracket> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let up = |t: f64| engine.pressure_upper(t);
    let lo = |t: f64| engine.pressure_lower(t).map(|r| r.0);
    let p0 = up(0.0)?;
    let l0 = lo(0.0)?;
    if p0 <= 0.0 {
        return Ok(DimBracket {
            h_lo: 0.0,
            h_hi: 0.0,
            iterations: 0,
            tol,
            slack: 0.0,
            p_upper_at_hi: p0,
            p_lower_at_lo: l0,
            search_max: q,
        });
    }
    let mut b = q.max(1.0);
    let mut pb = up(b)?;
    let mut doublings = 0;
    while pb > 0.0 {
        if doublings >= 60 {
            return Err(Error::NonConvergence(
                "upper pressure stays positive; maps may not contract".into(),
            ));
        }
        b *= 2.0;
        pb = up(b)?;
        doublings += 1;
    }
    if doublings > 0 {
        info!("search interval for the Bowen parameter expanded to [0, {b}]");
    }
    let (_, h_hi, _, p_hi, s1) = bisect(up, 0.0, b, p0, pb, tol / 4.0)?;
    // lower root lies in [0, h_hi] since P_lower <= P_upper
    let (h_lo, p_lo, s2) = if l0 < 0.0 {
        (0.0, l0, 0)
    } else {
        let lhi = lo(h_hi)?;
        if lhi >= 0.0 {
            (h_hi, lhi, 0)
        } else {
            let (a, _, fa, _, s) = bisect(lo, 0.0, h_hi, l0.max(f64::MIN_POSITIVE), lhi, tol / 4.0)?;
            (a, fa, s)
        }
    };
    let width = h_hi - h_lo;
    Ok(DimBracket {
        h_lo,
        h_hi,
        iterations: s1 + s2,
        tol,
        slack: (width - tol).max(0.0),
        p_upper_at_hi: p_hi,
        p_lower_at_lo: p_lo,
        search_max: b,
    })
}
