use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{GPoint, GroupSpec};
use crate::error::{Error, Result};

/// Element of the integer lattice `G(Z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub z: SmallVec<[i64; 8]>,
    pub t: SmallVec<[i64; 4]>,
}

impl LatticePoint {
    pub fn to_point(&self) -> GPoint {
        GPoint {
            z: self.z.iter().map(|&v| v as f64).collect(),
            t: self.t.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Fourth power of the gauge norm, exact while it fits in 53 bits.
    pub fn norm4(&self) -> f64 {
        let s: i64 = self.z.iter().map(|v| v * v).sum();
        let tt: i64 = self.t.iter().map(|v| v * v).sum();
        (s as f64) * (s as f64) + tt as f64
    }
}

/// Rounds to nearest, ties toward zero.
fn round_half_to_zero(x: f64) -> i64 {
    let tr = x.trunc();
    if (x - tr).abs() == 0.5 {
        tr as i64
    } else {
        x.round() as i64
    }
}

impl GroupSpec {
    fn require_lattice(&self) -> Result<()> {
        if !self.integer_structure() {
            return Err(Error::Unsupported(
                "integer lattice needs integral structure matrices".into(),
            ));
        }
        Ok(())
    }

    /// Largest gauge norm over the unit box `K0 = [-1/2, 1/2]^N`, found by
    /// enumerating its corners.
    pub fn lattice_cell_radius(&self) -> f64 {
        let n = self.topological_dim();
        if n > 20 {
            // every corner has the same |z| and |t|
            let s = self.m1() as f64 / 4.0;
            return (s * s + self.m2() as f64 / 4.0).sqrt().sqrt();
        }
        let mut best: f64 = 0.0;
        for mask in 0u32..(1u32 << n) {
            let c: Vec<f64> = (0..n)
                .map(|i| if mask & (1 << i) != 0 { 0.5 } else { -0.5 })
                .collect();
            let p = GPoint::new(&c[..self.m1()], &c[self.m1()..]);
            best = best.max(self.norm(&p));
        }
        best
    }

    /// The lattice point `gamma` with `gamma^{-1} * p` in the unit box `K0`.
    pub fn lattice_round(&self, p: &GPoint) -> Result<LatticePoint> {
        self.require_lattice()?;
        self.check(p)?;
        let z: SmallVec<[i64; 8]> = p.z.iter().map(|&x| round_half_to_zero(x)).collect();
        let zf: SmallVec<[f64; 8]> = z.iter().map(|&v| v as f64).collect();
        // vertical part of (gamma_z; 0)^{-1} * p
        let shift = GPoint {
            z: zf.iter().map(|v| -v).collect(),
            t: SmallVec::from_elem(0.0, self.m2()),
        };
        let u = self.mul_raw(&shift, p);
        let t = u.t.iter().map(|&x| round_half_to_zero(x)).collect();
        Ok(LatticePoint { z, t })
    }

    /// Lattice points with `r_lo <= ||gamma|| < r_hi`, in lexicographic
    /// `(z, t)` order. `max_scan` bounds the size of the scanned box.
    pub fn lattice_shell(&self, r_lo: f64, r_hi: f64, max_scan: f64) -> Result<LatticeShell> {
        self.require_lattice()?;
        if !(r_lo >= 0.0 && r_hi > r_lo && r_hi.is_finite()) {
            return Err(Error::invalid(format!("bad shell [{r_lo}, {r_hi})")));
        }
        let zb = r_hi.floor() as i64;
        let tb = (r_hi * r_hi).floor() as i64;
        let scan = ((2 * zb + 1) as f64).powi(self.m1() as i32)
            * ((2 * tb + 1) as f64).powi(self.m2() as i32);
        if scan > max_scan {
            return Err(Error::BudgetExceeded {
                what: "lattice shell scan".into(),
                estimate: scan,
                budget: max_scan as u64,
            });
        }
        Ok(LatticeShell::new(self.m1(), self.m2(), r_lo, r_hi, zb, tb))
    }
}

impl GroupSpec {
    /// Counts lattice points by gauge norm in `nbins` bins of equal
    /// logarithmic width covering `[r_lo, r_hi)`. Integer counts make the
    /// parallel reduction independent of scheduling.
    pub fn lattice_norm_histogram(
        &self,
        r_lo: f64,
        r_hi: f64,
        nbins: usize,
        max_scan: f64,
    ) -> Result<Vec<u64>> {
        self.require_lattice()?;
        if !(r_lo > 0.0 && r_hi > r_lo && r_hi.is_finite() && nbins > 0) {
            return Err(Error::invalid(format!("bad histogram range [{r_lo}, {r_hi})")));
        }
        let (m1, m2) = (self.m1(), self.m2());
        let zb = r_hi.floor() as i64;
        let tb = (r_hi * r_hi).floor() as i64;
        let scan = ((2 * zb + 1) as f64).powi(m1 as i32) * ((2 * tb + 1) as f64).powi(m2 as i32);
        if scan > max_scan {
            return Err(Error::BudgetExceeded {
                what: "lattice histogram scan".into(),
                estimate: scan,
                budget: max_scan as u64,
            });
        }
        // thresholds on the fourth power of the norm
        let step = (r_hi / r_lo).ln() / nbins as f64;
        let mut thr: Vec<f64> = (0..=nbins)
            .map(|i| (r_lo * (i as f64 * step).exp()).powi(4))
            .collect();
        thr[0] = r_lo.powi(4);
        thr[nbins] = r_hi.powi(4);
        let (lo4, hi4) = (thr[0], thr[nbins]);
        let bin = |n4: f64| thr.partition_point(|&x| x <= n4) - 1;
        let rest = m1 - 1;
        let counts = (-zb..=zb)
            .into_par_iter()
            .map(|z0| {
                let mut h = vec![0u64; nbins];
                let mut z = vec![-zb; rest];
                loop {
                    let s = z0 * z0 + z.iter().map(|v| v * v).sum::<i64>();
                    let z4 = (s as f64) * (s as f64);
                    if z4 < hi4 {
                        if m2 == 1 {
                            // norm increases with |t|: walk the bins upward
                            let mut b = 0usize;
                            let mut t = 0i64;
                            loop {
                                let n4 = z4 + (t * t) as f64;
                                if n4 >= hi4 {
                                    break;
                                }
                                if n4 >= lo4 {
                                    while thr[b + 1] <= n4 {
                                        b += 1;
                                    }
                                    h[b] += if t == 0 { 1 } else { 2 };
                                }
                                t += 1;
                            }
                        } else {
                            let mut t = vec![-tb; m2];
                            loop {
                                let n4 = z4 + t.iter().map(|v| (v * v) as f64).sum::<f64>();
                                if n4 >= lo4 && n4 < hi4 {
                                    h[bin(n4)] += 1;
                                }
                                if !odometer(&mut t, tb) {
                                    break;
                                }
                            }
                        }
                    }
                    if !odometer(&mut z, zb) {
                        break;
                    }
                }
                h
            })
            .reduce(
                || vec![0u64; nbins],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        Ok(counts)
    }
}

/// Advances `v` through `[-b, b]^len` lexicographically.
fn odometer(v: &mut [i64], b: i64) -> bool {
    for i in (0..v.len()).rev() {
        if v[i] < b {
            v[i] += 1;
            return true;
        }
        v[i] = -b;
    }
    false
}

/// Iterator over a lattice shell; see [`GroupSpec::lattice_shell`].
pub struct LatticeShell {
    m2: usize,
    lo4: f64,
    hi4: f64,
    zb: i64,
    tb: i64,
    z: Vec<i64>,
    t: Vec<i64>,
    t_hi: i64,
    z_done: bool,
    started: bool,
}

impl LatticeShell {
    fn new(m1: usize, m2: usize, r_lo: f64, r_hi: f64, zb: i64, tb: i64) -> Self {
        let lo2 = r_lo * r_lo;
        let hi2 = r_hi * r_hi;
        LatticeShell {
            m2,
            lo4: lo2 * lo2,
            hi4: hi2 * hi2,
            zb,
            tb,
            z: vec![-zb; m1],
            t: vec![0; m2],
            t_hi: 0,
            z_done: false,
            started: false,
        }
    }

    fn z4(&self) -> f64 {
        let s: i64 = self.z.iter().map(|v| v * v).sum();
        (s as f64) * (s as f64)
    }

    fn advance_z(&mut self) -> bool {
        for i in (0..self.z.len()).rev() {
            if self.z[i] < self.zb {
                self.z[i] += 1;
                return true;
            }
            self.z[i] = -self.zb;
        }
        false
    }

    /// Sets up the vertical range for the current `z`; returns false when
    /// it is empty.
    fn reset_t(&mut self) -> bool {
        let z4 = self.z4();
        if z4 >= self.hi4 {
            return false;
        }
        if self.m2 == 1 {
            let hi = (self.hi4 - z4).sqrt().ceil() as i64;
            let hi = hi.min(self.tb);
            self.t[0] = -hi;
            self.t_hi = hi;
        } else {
            for v in self.t.iter_mut() {
                *v = -self.tb;
            }
            self.t_hi = self.tb;
        }
        true
    }

    fn advance_t(&mut self) -> bool {
        for i in (0..self.t.len()).rev() {
            if self.t[i] < self.t_hi {
                self.t[i] += 1;
                return true;
            }
            self.t[i] = -self.t_hi;
        }
        false
    }

    fn current(&self) -> LatticePoint {
        LatticePoint {
            z: SmallVec::from_slice(&self.z),
            t: SmallVec::from_slice(&self.t),
        }
    }
}

impl Iterator for LatticeShell {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        if self.z_done {
            return None;
        }
        loop {
            let have = if !self.started {
                self.started = true;
                self.reset_t() || self.next_z()
            } else {
                self.advance_t() || self.next_z()
            };
            if !have {
                self.z_done = true;
                return None;
            }
            let p = self.current();
            let n4 = p.norm4();
            if n4 >= self.lo4 && n4 < self.hi4 {
                return Some(p);
            }
        }
    }
}

impl LatticeShell {
    /// Moves to the next `z` with a nonempty vertical range.
    fn next_z(&mut self) -> bool {
        while self.advance_z() {
            if self.reset_t() {
                return true;
            }
        }
        false
    }
}
