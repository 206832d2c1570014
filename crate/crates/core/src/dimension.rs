//! Comparison between Euclidean and sub-Riemannian Hausdorff dimension in
//! a Carnot group with layer dimensions `m_1, ..., m_iota`.
//!
//! A set of Euclidean dimension `alpha` has gauge dimension in
//! `[beta_-(alpha), beta_+(alpha)]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::GroupSpec;

#[derive(Debug, Clone, Serialize)]
pub struct DimComparison {
    /// `m_1, ..., m_iota`.
    pub layers: Vec<usize>,
    /// Topological dimension `N`.
    pub n: usize,
    /// Homogeneous dimension `Q`.
    pub q: usize,
}

impl DimComparison {
    pub fn new(layers: Vec<usize>) -> Result<Self> {
        if layers.is_empty() || layers.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        let n = layers.iter().sum();
        let q = layers.iter().enumerate().map(|(j, m)| (j + 1) * m).sum();
        Ok(DimComparison { layers, n, q })
    }

    pub fn for_group(g: &GroupSpec) -> Self {
        Self::new(vec![g.m1(), g.m2()]).expect("groups have positive layers")
    }

    fn is_step2(&self) -> bool {
        self.layers.len() == 2
    }

    fn check_alpha(&self, a: f64) -> Result<()> {
        if !(0.0..=self.n as f64).contains(&a) {
            return Err(Error::invalid(format!("alpha = {a} outside [0, {}]", self.n)));
        }
        Ok(())
    }

    fn check_beta(&self, b: f64) -> Result<()> {
        if !(0.0..=self.q as f64).contains(&b) {
            return Err(Error::invalid(format!("beta = {b} outside [0, {}]", self.q)));
        }
        Ok(())
    }

    /// `m_j` with `m_0 = m_{iota+1} = 0`.
    fn m(&self, j: usize) -> f64 {
        if j == 0 || j > self.layers.len() {
            0.0
        } else {
            self.layers[j - 1] as f64
        }
    }

    /// Layer-by-layer evaluation from the bottom.
    pub fn beta_minus_general(&self, a: f64) -> Result<f64> {
        self.check_alpha(a)?;
        let iota = self.layers.len();
        let (mut cum, mut weighted) = (0.0, 0.0);
        for l in 0..iota {
            cum += self.m(l);
            weighted += l as f64 * self.m(l);
            if cum < a && a <= cum + self.m(l + 1) {
                return Ok(weighted + (1 + l) as f64 * (a - cum));
            }
        }
        Ok(0.0)
    }

    /// Layer-by-layer evaluation from the top.
    pub fn beta_plus_general(&self, a: f64) -> Result<f64> {
        self.check_alpha(a)?;
        let iota = self.layers.len();
        let (mut cum, mut weighted) = (0.0, 0.0);
        for l in (2..=iota + 1).rev() {
            cum += self.m(l);
            weighted += l as f64 * self.m(l);
            if cum < a && a <= cum + self.m(l - 1) {
                return Ok(weighted + (l - 1) as f64 * (a - cum));
            }
        }
        Ok(0.0)
    }

    pub fn beta_minus(&self, a: f64) -> Result<f64> {
        if !self.is_step2() {
            return self.beta_minus_general(a);
        }
        self.check_alpha(a)?;
        let m1 = self.layers[0] as f64;
        Ok(a.max(2.0 * a - m1))
    }

    pub fn beta_plus(&self, a: f64) -> Result<f64> {
        if !self.is_step2() {
            return self.beta_plus_general(a);
        }
        self.check_alpha(a)?;
        let m2 = self.layers[1] as f64;
        Ok((2.0 * a).min(a + m2))
    }

    /// Breakpoints `(alpha, beta)` of a piecewise linear comparison
    /// function, from `(0, 0)` to `(N, Q)`.
    fn knots(&self, plus: bool) -> Vec<(f64, f64)> {
        let mut pts = vec![(0.0, 0.0)];
        let (mut a, mut b) = (0.0, 0.0);
        let order: Vec<usize> = if plus {
            (1..=self.layers.len()).rev().collect()
        } else {
            (1..=self.layers.len()).collect()
        };
        for j in order {
            a += self.m(j);
            b += (j as f64) * self.m(j);
            pts.push((a, b));
        }
        pts
    }

    fn invert(&self, b: f64, plus: bool) -> Result<f64> {
        self.check_beta(b)?;
        if self.is_step2() {
            let (m1, m2) = (self.layers[0] as f64, self.layers[1] as f64);
            return Ok(if plus {
                // 2 alpha on [0, m2], alpha + m2 beyond
                if b <= 2.0 * m2 {
                    b / 2.0
                } else {
                    b - m2
                }
            } else if b <= m1 {
                b
            } else {
                (b + m1) / 2.0
            });
        }
        let k = self.knots(plus);
        for w in k.windows(2) {
            let ((a0, b0), (a1, b1)) = (w[0], w[1]);
            if b <= b1 {
                return Ok(a0 + (b - b0) * (a1 - a0) / (b1 - b0));
            }
        }
        Ok(self.n as f64)
    }

    pub fn beta_plus_inverse(&self, b: f64) -> Result<f64> {
        self.invert(b, true)
    }

    pub fn beta_minus_inverse(&self, b: f64) -> Result<f64> {
        self.invert(b, false)
    }

    /// Range `[beta_+^{-1}(h), beta_-^{-1}(h)]` of Euclidean dimensions
    /// compatible with gauge dimension `h`.
    pub fn euclid_bounds(&self, h: f64) -> Result<(f64, f64)> {
        Ok((self.beta_plus_inverse(h)?, self.beta_minus_inverse(h)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis1() -> DimComparison {
        DimComparison::new(vec![2, 1]).unwrap()
    }

    #[test]
    fn heis1_values() {
        let d = heis1();
        assert_eq!(d.beta_plus(0.5).unwrap(), 1.0);
        assert_eq!(d.beta_minus(2.5).unwrap(), 3.0);
        assert_eq!(d.beta_plus(3.0).unwrap(), 4.0);
        assert_eq!(d.beta_plus_inverse(2.0).unwrap(), 1.0);
        assert_eq!(d.beta_minus_inverse(2.0).unwrap(), 2.0);
        assert_eq!(d.euclid_bounds(0.0).unwrap(), (0.0, 0.0));
        assert_eq!(d.euclid_bounds(4.0).unwrap(), (3.0, 3.0));
        assert!(d.beta_plus(3.5).is_err());
        assert!(d.euclid_bounds(-0.1).is_err());
    }

    #[test]
    fn general_step_matches_closed_forms() {
        for layers in [vec![2, 1], vec![4, 1], vec![4, 3], vec![6, 2]] {
            let d = DimComparison::new(layers).unwrap();
            for k in 0..=500 {
                let a = d.n as f64 * k as f64 / 500.0;
                let (m, p) = (d.beta_minus(a).unwrap(), d.beta_plus(a).unwrap());
                assert!((m - d.beta_minus_general(a).unwrap()).abs() < 1e-12);
                assert!((p - d.beta_plus_general(a).unwrap()).abs() < 1e-12);
                assert!(m <= p);
            }
        }
    }

    #[test]
    fn three_step_inverse() {
        let d = DimComparison::new(vec![2, 1, 1]).unwrap();
        assert_eq!(d.q, 7);
        for k in 0..=100 {
            let a = 4.0 * k as f64 / 100.0;
            let b = d.beta_plus(a).unwrap();
            assert!((d.beta_plus_inverse(b).unwrap() - a).abs() < 1e-12);
            let b = d.beta_minus(a).unwrap();
            assert!((d.beta_minus_inverse(b).unwrap() - a).abs() < 1e-12);
        }
        assert_eq!(d.beta_plus(4.0).unwrap(), 7.0);
    }
}
