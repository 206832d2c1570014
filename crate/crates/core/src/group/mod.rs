//! Step-2 Carnot groups in exponential coordinates.
//!
//! A group is `R^{m1} x R^{m2}` with product
//! `(z, t) * (w, s) = (z + w, t + s + ((B^i z) . w)_i)` for skew-symmetric
//! structure matrices `B^1..B^{m2}`. The complex and quaternionic Heisenberg
//! groups are built in with the coordinate layouts `(x, y; t)` and
//! `(x, y, z, w; t, u, v)`, each block having length `n`.

mod lattice;
mod region;

pub use lattice::{LatticePoint, LatticeShell};
pub use region::Region;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default absolute tolerance for geometric comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

pub type Coords<const N: usize> = SmallVec<[f64; N]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IwasawaKind {
    ComplexHeisenberg(usize),
    QuaternionicHeisenberg(usize),
    None,
}

/// A group element `(z; t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPoint {
    pub z: Coords<8>,
    pub t: Coords<4>,
}

impl GPoint {
    pub fn new(z: &[f64], t: &[f64]) -> Self {
        GPoint {
            z: SmallVec::from_slice(z),
            t: SmallVec::from_slice(t),
        }
    }

    pub fn origin(g: &GroupSpec) -> Self {
        GPoint {
            z: SmallVec::from_elem(0.0, g.m1),
            t: SmallVec::from_elem(0.0, g.m2),
        }
    }

    /// Splits a flat coordinate list `z1..z_{m1}, t1..t_{m2}`.
    pub fn from_flat(g: &GroupSpec, coords: &[f64]) -> Result<Self> {
        if coords.len() != g.topological_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coordinates", g.topological_dim()),
                got: format!("{}", coords.len()),
            });
        }
        let p = GPoint::new(&coords[..g.m1], &coords[g.m1..]);
        if !p.is_finite() {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(p)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.z.iter().chain(self.t.iter()).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(self.t.iter()).all(|x| x.is_finite())
    }

    fn horizontal_sq(&self) -> f64 {
        self.z.iter().map(|x| x * x).sum()
    }

    fn vertical_sq(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum()
    }
}

/// A point of the one-point compactification, used only for cross ratios
/// and poles of conformal maps.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtPoint {
    Finite(GPoint),
    Infinity,
}

/// Nonzero entry `(row, col, value)` of a structure matrix.
type Term = (usize, usize, f64);

/// A step-2 Carnot group given by its structure matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    m1: usize,
    m2: usize,
    structure: Vec<Vec<Vec<f64>>>,
    terms: Vec<Vec<Term>>,
    kind: IwasawaKind,
    integer_structure: bool,
}

impl GroupSpec {
    /// Builds a group from `m2` skew-symmetric `m1 x m1` matrices.
    pub fn step2(structure: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::with_kind(structure, IwasawaKind::None)
    }

    fn with_kind(structure: Vec<Vec<Vec<f64>>>, kind: IwasawaKind) -> Result<Self> {
        let m2 = structure.len();
        if m2 == 0 {
            return Err(Error::invalid("need at least one structure matrix"));
        }
        let m1 = structure[0].len();
        if m1 == 0 {
            return Err(Error::invalid("horizontal dimension must be positive"));
        }
        let mut terms = Vec::with_capacity(m2);
        let mut integer_structure = true;
        for (i, b) in structure.iter().enumerate() {
            if b.len() != m1 || b.iter().any(|row| row.len() != m1) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{m1}x{m1} structure matrix"),
                    got: format!("matrix {i} with {} rows", b.len()),
                });
            }
            let mut nz = Vec::new();
            for j in 0..m1 {
                for k in 0..m1 {
                    let v = b[j][k];
                    if !v.is_finite() {
                        return Err(Error::invalid("structure matrix entry is not finite"));
                    }
                    if v != -b[k][j] {
                        return Err(Error::invalid(format!(
                            "structure matrix {i} is not skew-symmetric at ({j},{k})"
                        )));
                    }
                    if v != 0.0 {
                        nz.push((j, k, v));
                    }
                    if v.fract() != 0.0 {
                        integer_structure = false;
                    }
                }
            }
            terms.push(nz);
        }
        match kind {
            IwasawaKind::ComplexHeisenberg(n) if m1 != 2 * n || m2 != 1 => {
                return Err(Error::invalid("complex Heisenberg group needs m1 = 2n, m2 = 1"))
            }
            IwasawaKind::QuaternionicHeisenberg(n) if m1 != 4 * n || m2 != 3 => {
                return Err(Error::invalid(
                    "quaternionic Heisenberg group needs m1 = 4n, m2 = 3",
                ))
            }
            _ => {}
        }
        Ok(GroupSpec {
            m1,
            m2,
            structure,
            terms,
            kind,
            integer_structure,
        })
    }

    /// The complex Heisenberg group `Heis^n`, coordinates `(x, y; t)` with
    /// `t'' = t + t' + 2(x'.y - x.y')`.
    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Heisenberg rank must be at least 1"));
        }
        let m1 = 2 * n;
        let mut b = vec![vec![0.0; m1]; m1];
        for k in 0..n {
            // coefficient of x'_k y_k
            b[k][n + k] = 2.0;
            b[n + k][k] = -2.0;
        }
        Self::with_kind(vec![b], IwasawaKind::ComplexHeisenberg(n))
    }

    /// The quaternionic Heisenberg group, coordinates `(x, y, z, w; t, u, v)`.
    pub fn quaternionic_heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Heisenberg rank must be at least 1"));
        }
        let m1 = 4 * n;
        let (x, y, z, w) = (0, n, 2 * n, 3 * n);
        // (first-point block, second-point block) pairs with coefficient +2
        // on a'.b where a' belongs to the second point.
        let pairs: [[(usize, usize); 2]; 3] = [
            [(x, y), (w, z)],
            [(x, z), (y, w)],
            [(x, w), (z, y)],
        ];
        let mut mats = Vec::with_capacity(3);
        for layer in pairs.iter() {
            let mut b = vec![vec![0.0; m1]; m1];
            for &(primed, plain) in layer {
                for k in 0..n {
                    b[primed + k][plain + k] = 2.0;
                    b[plain + k][primed + k] = -2.0;
                }
            }
            mats.push(b);
        }
        Self::with_kind(mats, IwasawaKind::QuaternionicHeisenberg(n))
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn kind(&self) -> IwasawaKind {
        self.kind
    }

    pub fn is_iwasawa(&self) -> bool {
        self.kind != IwasawaKind::None
    }

    pub fn integer_structure(&self) -> bool {
        self.integer_structure
    }

    pub fn structure_matrices(&self) -> &[Vec<Vec<f64>>] {
        &self.structure
    }

    /// Homogeneous dimension `Q = m1 + 2 m2`.
    pub fn homogeneous_dim(&self) -> usize {
        self.m1 + 2 * self.m2
    }

    /// Topological dimension `N = m1 + m2`.
    pub fn topological_dim(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn check(&self, p: &GPoint) -> Result<()> {
        if p.z.len() != self.m1 || p.t.len() != self.m2 {
            return Err(Error::DimensionMismatch {
                expected: format!("({}; {})", self.m1, self.m2),
                got: format!("({}; {})", p.z.len(), p.t.len()),
            });
        }
        Ok(())
    }

    /// `((B^i z) . w)_i` accumulated into `out`.
    #[inline]
    fn add_bracket(&self, z: &[f64], w: &[f64], out: &mut [f64]) {
        for (o, terms) in out.iter_mut().zip(&self.terms) {
            let mut acc = 0.0;
            for &(j, k, v) in terms {
                acc += v * z[k] * w[j];
            }
            *o += acc;
        }
    }

    pub(crate) fn mul_raw(&self, p: &GPoint, q: &GPoint) -> GPoint {
        let mut z = p.z.clone();
        for (a, b) in z.iter_mut().zip(&q.z) {
            *a += b;
        }
        let mut t = p.t.clone();
        for (a, b) in t.iter_mut().zip(&q.t) {
            *a += b;
        }
        self.add_bracket(&p.z, &q.z, &mut t);
        GPoint { z, t }
    }

    /// Group product `p * q`.
    pub fn mul(&self, p: &GPoint, q: &GPoint) -> Result<GPoint> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.mul_raw(p, q))
    }

    /// Group inverse, which is the Euclidean negative.
    pub fn inv(&self, p: &GPoint) -> Result<GPoint> {
        self.check(p)?;
        Ok(neg(p))
    }

    pub(crate) fn dilate_raw(&self, r: f64, p: &GPoint) -> GPoint {
        let r2 = r * r;
        GPoint {
            z: p.z.iter().map(|x| r * x).collect(),
            t: p.t.iter().map(|x| r2 * x).collect(),
        }
    }

    /// Dilation `delta_r(z, t) = (r z, r^2 t)`.
    pub fn dilate(&self, r: f64, p: &GPoint) -> Result<GPoint> {
        self.check(p)?;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
        }
        Ok(self.dilate_raw(r, p))
    }

    /// Gauge norm `(|z|^4 + |t|^2)^{1/4}`.
    pub fn norm(&self, p: &GPoint) -> f64 {
        let s = p.horizontal_sq();
        (s * s + p.vertical_sq()).sqrt().sqrt()
    }

    /// Fourth power of the gauge norm.
    pub fn norm4(&self, p: &GPoint) -> f64 {
        let s = p.horizontal_sq();
        s * s + p.vertical_sq()
    }

    /// Gauge distance `||p^{-1} * q||`.
    pub fn dist(&self, p: &GPoint, q: &GPoint) -> f64 {
        let mut dz2 = 0.0;
        for (a, b) in p.z.iter().zip(&q.z) {
            let d = b - a;
            dz2 += d * d;
        }
        let mut dt2 = 0.0;
        for (i, terms) in self.terms.iter().enumerate() {
            let mut br = 0.0;
            for &(j, k, v) in terms {
                br += v * p.z[k] * q.z[j];
            }
            let d = q.t[i] - p.t[i] - br;
            dt2 += d * d;
        }
        (dz2 * dz2 + dt2).sqrt().sqrt()
    }

    /// Checked version of [`GroupSpec::dist`].
    pub fn gauge_dist(&self, p: &GPoint, q: &GPoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.dist(p, q))
    }

    /// Cross ratio `d(p1,p3) d(p2,p4) / (d(p1,p4) d(p2,p3))` on the
    /// compactified group. A point at infinity has its factors deleted.
    pub fn cross_ratio(&self, pts: [&ExtPoint; 4]) -> Result<f64> {
        let n_inf = pts.iter().filter(|p| matches!(p, ExtPoint::Infinity)).count();
        if n_inf > 1 {
            return Err(Error::invalid("more than two coincident points in cross ratio"));
        }
        for p in pts.iter() {
            if let ExtPoint::Finite(p) = p {
                self.check(p)?;
            }
        }
        for i in 0..4 {
            let mut same = 1;
            for j in 0..4 {
                if i != j && self.ext_coincide(pts[i], pts[j]) {
                    same += 1;
                }
            }
            if same > 2 {
                return Err(Error::invalid("more than two coincident points in cross ratio"));
            }
        }
        let d = |a: usize, b: usize| -> Option<f64> {
            match (pts[a], pts[b]) {
                (ExtPoint::Finite(p), ExtPoint::Finite(q)) => Some(self.dist(p, q)),
                _ => None,
            }
        };
        let num = d(0, 2).unwrap_or(1.0) * d(1, 3).unwrap_or(1.0);
        let den = d(0, 3).unwrap_or(1.0) * d(1, 2).unwrap_or(1.0);
        if den == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(num / den)
    }

    fn ext_coincide(&self, a: &ExtPoint, b: &ExtPoint) -> bool {
        match (a, b) {
            (ExtPoint::Infinity, ExtPoint::Infinity) => true,
            (ExtPoint::Finite(p), ExtPoint::Finite(q)) => p == q,
            _ => false,
        }
    }

    /// Parses the short group names used on the command line: `heis_c:n`,
    /// `heis_q:n`.
    pub fn from_short_name(name: &str) -> Result<Self> {
        let (kind, n) = name.split_once(':').unwrap_or((name, "1"));
        let n: usize = n
            .parse()
            .map_err(|_| Error::invalid(format!("bad group rank in '{name}'")))?;
        match kind {
            "heis_c" | "heis" => Self::heisenberg(n),
            "heis_q" => Self::quaternionic_heisenberg(n),
            _ => Err(Error::invalid(format!("unknown group '{name}'"))),
        }
    }
}

pub(crate) fn neg(p: &GPoint) -> GPoint {
    GPoint {
        z: p.z.iter().map(|x| -x).collect(),
        t: p.t.iter().map(|x| -x).collect(),
    }
}

/// Group description in system-spec files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupDescriptor {
    HeisC { n: usize },
    HeisQ { n: usize },
    Step2 {
        #[serde(rename = "B")]
        b: Vec<Vec<Vec<f64>>>,
    },
}

impl GroupDescriptor {
    pub fn build(&self) -> Result<GroupSpec> {
        match self {
            GroupDescriptor::HeisC { n } => GroupSpec::heisenberg(*n),
            GroupDescriptor::HeisQ { n } => GroupSpec::quaternionic_heisenberg(*n),
            GroupDescriptor::Step2 { b } => GroupSpec::step2(b.clone()),
        }
    }

    pub fn describe(g: &GroupSpec) -> Self {
        match g.kind() {
            IwasawaKind::ComplexHeisenberg(n) => GroupDescriptor::HeisC { n },
            IwasawaKind::QuaternionicHeisenberg(n) => GroupDescriptor::HeisQ { n },
            IwasawaKind::None => GroupDescriptor::Step2 {
                b: g.structure.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> GroupSpec {
        GroupSpec::heisenberg(1).unwrap()
    }

    #[test]
    fn heisenberg_product() {
        let g = h1();
        let p = GPoint::new(&[1.0, 0.0], &[0.0]);
        let q = GPoint::new(&[0.0, 1.0], &[0.0]);
        assert_eq!(g.mul(&p, &q).unwrap(), GPoint::new(&[1.0, 1.0], &[-2.0]));
        let o = GPoint::origin(&g);
        assert_eq!(g.mul(&p, &o).unwrap(), p);
        let pinv = GPoint::new(&[-1.0, 0.0], &[0.0]);
        assert_eq!(g.mul(&p, &pinv).unwrap(), o);
    }

    #[test]
    fn inverse_is_negative() {
        let g = h1();
        let p = GPoint::new(&[1.0, 2.0], &[3.0]);
        assert_eq!(g.inv(&p).unwrap(), GPoint::new(&[-1.0, -2.0], &[-3.0]));
        let o = GPoint::origin(&g);
        assert_eq!(g.inv(&o).unwrap(), o);
        let q = GPoint::new(&[0.3, -1.7], &[2.2]);
        assert_eq!(g.mul(&q, &g.inv(&q).unwrap()).unwrap(), o);
    }

    #[test]
    fn dilation() {
        let g = h1();
        let p = GPoint::new(&[1.0, 0.0], &[1.0]);
        assert_eq!(g.dilate(2.0, &p).unwrap(), GPoint::new(&[2.0, 0.0], &[4.0]));
        assert_eq!(g.dilate(1.0, &p).unwrap(), p);
        let q = GPoint::new(&[0.37, -1.1], &[0.9]);
        let back = g.dilate(0.5, &g.dilate(2.0, &q).unwrap()).unwrap();
        for (a, b) in back.to_flat().iter().zip(q.to_flat()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(g.dilate(0.0, &p).is_err());
        assert!(g.dilate(f64::NAN, &p).is_err());
    }

    #[test]
    fn gauge_values() {
        let g = h1();
        assert_eq!(g.norm(&GPoint::new(&[3.0, 4.0], &[0.0])), 5.0);
        assert_eq!(g.norm(&GPoint::new(&[0.0, 0.0], &[4.0])), 2.0);
        let o = GPoint::origin(&g);
        assert_eq!(g.dist(&o, &o), 0.0);
    }

    #[test]
    fn dist_matches_norm_of_quotient() {
        let g = h1();
        let p = GPoint::new(&[0.3, -1.2], &[0.7]);
        let q = GPoint::new(&[-0.4, 2.0], &[-1.1]);
        let via = g.norm(&g.mul(&g.inv(&p).unwrap(), &q).unwrap());
        assert!((g.dist(&p, &q) - via).abs() < 1e-14);
        assert!((g.dist(&p, &q) - g.dist(&q, &p)).abs() < 1e-14);
    }

    #[test]
    fn cross_ratio_cases() {
        let g = h1();
        let f = |x: f64| ExtPoint::Finite(GPoint::new(&[x, 0.0], &[0.0]));
        let (a, b, c, d) = (f(0.0), f(2.0), f(1.0), f(3.0));
        let cr = g.cross_ratio([&a, &b, &c, &d]).unwrap();
        assert!((cr - 1.0 / 3.0).abs() < 1e-15);
        // p1 = p3
        let cr = g.cross_ratio([&a, &b, &a, &d]).unwrap();
        assert_eq!(cr, 0.0);
        // p2 = infinity deletes d(p2, .)
        let inf = ExtPoint::Infinity;
        let cr = g.cross_ratio([&a, &inf, &c, &d]).unwrap();
        assert!((cr - 1.0 / 3.0).abs() < 1e-15);
        assert!(g.cross_ratio([&a, &a, &a, &d]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = h1();
        let bad = GPoint::new(&[1.0], &[0.0]);
        let ok = GPoint::origin(&g);
        assert!(matches!(g.mul(&bad, &ok), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn structure_validation() {
        assert!(GroupSpec::step2(vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]]).is_err());
        let g = GroupSpec::step2(vec![vec![vec![0.0, 1.0], vec![-1.0, 0.0]]]).unwrap();
        assert_eq!(g.homogeneous_dim(), 4);
        assert_eq!(g.topological_dim(), 3);
        assert!(g.integer_structure());
        assert!(!g.is_iwasawa());
        let q = GroupSpec::quaternionic_heisenberg(1).unwrap();
        assert_eq!((q.m1(), q.m2(), q.homogeneous_dim()), (4, 3, 10));
    }

    #[test]
    fn quaternionic_law_matches_real_coordinates() {
        let g = GroupSpec::quaternionic_heisenberg(1).unwrap();
        let (x, y, z, w) = (0.3, -0.7, 1.1, 0.4);
        let (x2, y2, z2, w2) = (-0.2, 0.5, 0.9, -1.3);
        let p = GPoint::new(&[x, y, z, w], &[0.1, 0.2, 0.3]);
        let q = GPoint::new(&[x2, y2, z2, w2], &[-0.4, 0.6, 0.8]);
        let r = g.mul(&p, &q).unwrap();
        let t = 0.1 - 0.4 + 2.0 * (x2 * y - x * y2 + w2 * z - w * z2);
        let u = 0.2 + 0.6 + 2.0 * (x2 * z - x * z2 + y2 * w - y * w2);
        let v = 0.3 + 0.8 + 2.0 * (x2 * w - x * w2 + z2 * y - z * y2);
        assert!((r.t[0] - t).abs() < 1e-14);
        assert!((r.t[1] - u).abs() < 1e-14);
        assert!((r.t[2] - v).abs() < 1e-14);
    }
}
