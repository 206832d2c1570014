//! Conformal maps of Iwasawa groups stored as chains of primitives.
//!
//! A chain lists its primitives in the order they act on a point: the
//! first entry is applied first. The continued-fraction map `J o l_gamma`
//! is therefore `[Translate(gamma), Invert]`.

mod sup;

pub use sup::{sup_norm_registry, Bracketed, Sampled, SupNormStrategy, EPS_FLOOR};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{neg, ExtPoint, GPoint, GroupSpec, IwasawaKind, Region, DEFAULT_TOL};

/// Upper limit on inversions accepted from external map descriptions.
pub const MAX_INVERSIONS: usize = 64;

/// A unitary rotation of the horizontal layer of `Heis^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rotation {
    /// Multiplication of every complex coordinate by `e^{i theta}`.
    Angle(f64),
    /// A real `2n x 2n` matrix in the `(x, y)` coordinate layout.
    Matrix(Vec<Vec<f64>>),
}

impl Rotation {
    fn inverse(&self) -> Rotation {
        match self {
            Rotation::Angle(th) => Rotation::Angle(-th),
            Rotation::Matrix(m) => {
                let n = m.len();
                Rotation::Matrix((0..n).map(|i| (0..n).map(|j| m[j][i]).collect()).collect())
            }
        }
    }

    fn validate(&self, g: &GroupSpec) -> Result<()> {
        let n = match g.kind() {
            IwasawaKind::ComplexHeisenberg(n) => n,
            _ => {
                return Err(Error::Unsupported(
                    "rotations are only available on complex Heisenberg groups".into(),
                ))
            }
        };
        match self {
            Rotation::Angle(th) if th.is_finite() => Ok(()),
            Rotation::Angle(_) => Err(Error::invalid("rotation angle is not finite")),
            Rotation::Matrix(m) => {
                let d = 2 * n;
                if m.len() != d || m.iter().any(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{d}x{d} rotation"),
                        got: format!("{} rows", m.len()),
                    });
                }
                let tol = 1e-10;
                for i in 0..d {
                    for j in 0..d {
                        let dot: f64 = (0..d).map(|k| m[k][i] * m[k][j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (dot - want).abs() > tol {
                            return Err(Error::invalid("rotation matrix is not orthogonal"));
                        }
                    }
                }
                // commutes with (x, y) -> (-y, x)
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (m[i][j], m[i][n + j]);
                        let (c, e) = (m[n + i][j], m[n + i][n + j]);
                        if (a - e).abs() > tol || (b + c).abs() > tol {
                            return Err(Error::invalid("rotation matrix is not complex-linear"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn apply(&self, z: &mut [f64]) {
        match self {
            Rotation::Angle(th) => {
                let n = z.len() / 2;
                let (s, c) = th.sin_cos();
                for k in 0..n {
                    let (x, y) = (z[k], z[n + k]);
                    z[k] = c * x - s * y;
                    z[n + k] = s * x + c * y;
                }
            }
            Rotation::Matrix(m) => {
                let old: Vec<f64> = z.to_vec();
                for (i, row) in m.iter().enumerate() {
                    z[i] = row.iter().zip(&old).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Translate(GPoint),
    Dilate(f64),
    Rotate(Rotation),
    Invert,
}

impl Primitive {
    fn inverse(&self) -> Primitive {
        match self {
            Primitive::Translate(g) => Primitive::Translate(neg(g)),
            Primitive::Dilate(r) => Primitive::Dilate(1.0 / r),
            Primitive::Rotate(rot) => Primitive::Rotate(rot.inverse()),
            Primitive::Invert => Primitive::Invert,
        }
    }

    fn validate(&self, g: &GroupSpec) -> Result<()> {
        match self {
            Primitive::Translate(p) => {
                g.check(p)?;
                if !p.is_finite() {
                    return Err(Error::invalid("translation is not finite"));
                }
            }
            Primitive::Dilate(r) => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
                }
            }
            Primitive::Rotate(rot) => rot.validate(g)?,
            Primitive::Invert => {
                if !matches!(g.kind(), IwasawaKind::ComplexHeisenberg(_)) {
                    return Err(Error::Unsupported(
                        "inversion is only available on complex Heisenberg groups".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The Koranyi inversion `J(z; t) = (z / (|z|^2 - i t); -t / ||p||^4)` on
/// `Heis^n`. Returns `None` at the origin.
pub(crate) fn invert_point(p: &GPoint) -> Option<GPoint> {
    let a: f64 = p.z.iter().map(|x| x * x).sum();
    let t = p.t[0];
    let n4 = a * a + t * t;
    if n4 == 0.0 {
        return None;
    }
    let n = p.z.len() / 2;
    let mut out = p.clone();
    for k in 0..n {
        let (x, y) = (p.z[k], p.z[n + k]);
        // (x + iy)(a + it) / n4
        out.z[k] = (x * a - y * t) / n4;
        out.z[n + k] = (y * a + x * t) / n4;
    }
    out.t[0] = -t / n4;
    Some(out)
}

/// A conformal map as a chain of primitives, with its pole and scaling
/// factor cached.
#[derive(Debug, Clone)]
pub struct ConformalChain {
    group: Arc<GroupSpec>,
    prims: Vec<Primitive>,
    pole: Option<GPoint>,
    r_f: f64,
    inversions: usize,
}

impl ConformalChain {
    pub fn new(group: Arc<GroupSpec>, prims: Vec<Primitive>) -> Result<Self> {
        for p in &prims {
            p.validate(&group)?;
        }
        Self::assemble(group, prims)
    }

    pub fn identity(group: Arc<GroupSpec>) -> Self {
        ConformalChain {
            group,
            prims: Vec::new(),
            pole: None,
            r_f: 1.0,
            inversions: 0,
        }
    }

    fn assemble(group: Arc<GroupSpec>, prims: Vec<Primitive>) -> Result<Self> {
        let inversions = prims.iter().filter(|p| matches!(p, Primitive::Invert)).count();
        let mut c = ConformalChain {
            group,
            prims,
            pole: None,
            r_f: 1.0,
            inversions,
        };
        if inversions > 0 {
            c.pole = match c.preimage_of_infinity() {
                ExtPoint::Finite(p) => Some(p),
                ExtPoint::Infinity => None,
            };
        }
        c.r_f = c.scaling_factor()?;
        Ok(c)
    }

    /// `F^{-1}(infinity)`, tracked through the inverse chain.
    fn preimage_of_infinity(&self) -> ExtPoint {
        let mut x = ExtPoint::Infinity;
        for p in self.prims.iter().rev() {
            x = match (p, x) {
                (Primitive::Invert, ExtPoint::Infinity) => ExtPoint::Finite(GPoint::origin(&self.group)),
                (Primitive::Invert, ExtPoint::Finite(q)) => match invert_point(&q) {
                    Some(v) => ExtPoint::Finite(v),
                    None => ExtPoint::Infinity,
                },
                (_, ExtPoint::Infinity) => ExtPoint::Infinity,
                (prim, ExtPoint::Finite(q)) => {
                    let mut q = q;
                    apply_prim(&self.group, &prim.inverse(), &mut q);
                    ExtPoint::Finite(q)
                }
            };
        }
        x
    }

    /// `F(infinity)`.
    fn image_of_infinity(&self) -> ExtPoint {
        let mut x = ExtPoint::Infinity;
        for p in &self.prims {
            x = match (p, x) {
                (Primitive::Invert, ExtPoint::Infinity) => ExtPoint::Finite(GPoint::origin(&self.group)),
                (Primitive::Invert, ExtPoint::Finite(q)) => match invert_point(&q) {
                    Some(v) => ExtPoint::Finite(v),
                    None => ExtPoint::Infinity,
                },
                (_, ExtPoint::Infinity) => ExtPoint::Infinity,
                (prim, ExtPoint::Finite(q)) => {
                    let mut q = q;
                    apply_prim(&self.group, prim, &mut q);
                    ExtPoint::Finite(q)
                }
            };
        }
        x
    }

    fn scaling_factor(&self) -> Result<f64> {
        let g = &self.group;
        let base = self.pole.clone().unwrap_or_else(|| GPoint::origin(g));
        for k in 1..=16 {
            let mut q = base.clone();
            let step = k as f64 * 0.75;
            q.z[(k - 1) % g.m1()] += step;
            q.t[(k - 1) % g.m2()] += 0.3 * step;
            if let Ok(d) = self.deriv_norm_at(&q) {
                return Ok(match &self.pole {
                    Some(a) => {
                        let r = g.dist(&q, a);
                        d * r * r
                    }
                    None => d,
                });
            }
        }
        Err(Error::NonConvergence(
            "no regular point found to evaluate the scaling factor".into(),
        ))
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.prims
    }

    /// `F^{-1}(infinity)` when it is a finite point.
    pub fn pole(&self) -> Option<&GPoint> {
        self.pole.as_ref()
    }

    pub fn scaling_factor_rf(&self) -> f64 {
        self.r_f
    }

    pub fn inversions(&self) -> usize {
        self.inversions
    }

    pub fn is_similarity(&self) -> bool {
        self.pole.is_none()
    }

    pub fn apply(&self, p: &GPoint) -> Result<GPoint> {
        self.group.check(p)?;
        self.apply_unchecked(p)
    }

    pub(crate) fn apply_unchecked(&self, p: &GPoint) -> Result<GPoint> {
        let mut x = p.clone();
        for prim in &self.prims {
            if let Primitive::Invert = prim {
                let n = self.group.norm(&x);
                if n < DEFAULT_TOL {
                    return Err(pole_error(n));
                }
            }
            apply_prim(&self.group, prim, &mut x);
        }
        Ok(x)
    }

    /// Image of `p` together with `||DF(p)||`.
    pub fn apply_with_deriv(&self, p: &GPoint) -> Result<(GPoint, f64)> {
        self.group.check(p)?;
        let mut x = p.clone();
        let mut d = 1.0;
        for prim in &self.prims {
            match prim {
                Primitive::Invert => {
                    let n = self.group.norm(&x);
                    if n < DEFAULT_TOL {
                        return Err(pole_error(n));
                    }
                    d /= n * n;
                }
                Primitive::Dilate(r) => d *= r,
                _ => {}
            }
            apply_prim(&self.group, prim, &mut x);
        }
        Ok((x, d))
    }

    /// `||DF(p)||` by the chain rule along the orbit of `p`.
    pub fn deriv_norm_at(&self, p: &GPoint) -> Result<f64> {
        self.apply_with_deriv(p).map(|(_, d)| d)
    }

    /// Lower and upper bounds on `sup_{p in region} ||DF(p)||`.
    pub fn deriv_norm_sup(&self, region: &Region, mode: &dyn SupNormStrategy) -> Result<(f64, f64)> {
        mode.bounds(self, region)
    }

    /// `self o other`: apply `other` first.
    pub fn compose(&self, other: &ConformalChain) -> Result<ConformalChain> {
        if self.group != other.group {
            return Err(Error::DimensionMismatch {
                expected: "maps on the same group".into(),
                got: "maps on different groups".into(),
            });
        }
        let mut prims = other.prims.clone();
        prims.extend(self.prims.iter().cloned());
        Self::assemble(self.group.clone(), prims)
    }

    pub fn invert_chain(&self) -> Result<ConformalChain> {
        let prims = self.prims.iter().rev().map(Primitive::inverse).collect();
        Self::assemble(self.group.clone(), prims)
    }

    /// A ball containing `F(region)`. Exact Mobius bounds are used for
    /// similarities and single inversions; other chains fall back on
    /// sampled distances inflated by 10%.
    pub fn image_ball(&self, region: &Region) -> Result<(GPoint, f64)> {
        let g = &self.group;
        let c = region.center();
        let r = region.outer_radius();
        match &self.pole {
            None => Ok((self.apply(c)?, self.r_f * r)),
            Some(a) if self.inversions <= 1 => {
                let d = g.dist(c, a);
                if let Region::Annulus { inner, .. } = region {
                    // pole in the hole: d(F(p), F(inf)) = r_F / d(p, a)
                    if *inner - d > EPS_FLOOR {
                        if let ExtPoint::Finite(fi) = self.image_of_infinity() {
                            return Ok((fi, self.r_f / (inner - d)));
                        }
                    }
                }
                if d - r <= EPS_FLOOR {
                    return Err(pole_error(d - r));
                }
                let fc = self.apply(c)?;
                Ok((fc, self.r_f * r / ((d - r) * d)))
            }
            Some(_) => {
                use rand::SeedableRng;
                let fc = self.apply(c)?;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1ba11);
                let mut best: f64 = 0.0;
                for p in region.sample(g, &mut rng, 1000) {
                    best = best.max(g.dist(&fc, &self.apply_unchecked(&p)?));
                }
                Ok((fc, 1.1 * best))
            }
        }
    }

    pub fn from_spec(group: Arc<GroupSpec>, spec: &ChainSpec) -> Result<Self> {
        let mut prims = Vec::with_capacity(spec.chain.len());
        for p in &spec.chain {
            match p {
                PrimitiveSpec::Translate(v) => {
                    prims.push(Primitive::Translate(GPoint::from_flat(&group, v)?))
                }
                PrimitiveSpec::Dilate(r) => prims.push(Primitive::Dilate(*r)),
                PrimitiveSpec::RotateTheta(th) => prims.push(Primitive::Rotate(Rotation::Angle(*th))),
                PrimitiveSpec::RotateMatrix(m) => {
                    prims.push(Primitive::Rotate(Rotation::Matrix(m.clone())))
                }
                PrimitiveSpec::Invert(true) => prims.push(Primitive::Invert),
                PrimitiveSpec::Invert(false) => {}
            }
        }
        if prims.iter().filter(|p| matches!(p, Primitive::Invert)).count() > MAX_INVERSIONS {
            return Err(Error::invalid(format!(
                "map has more than {MAX_INVERSIONS} inversions"
            )));
        }
        Self::new(group, prims)
    }

    pub fn to_spec(&self) -> ChainSpec {
        let chain = self
            .prims
            .iter()
            .map(|p| match p {
                Primitive::Translate(g) => PrimitiveSpec::Translate(g.to_flat()),
                Primitive::Dilate(r) => PrimitiveSpec::Dilate(*r),
                Primitive::Rotate(Rotation::Angle(th)) => PrimitiveSpec::RotateTheta(*th),
                Primitive::Rotate(Rotation::Matrix(m)) => PrimitiveSpec::RotateMatrix(m.clone()),
                Primitive::Invert => PrimitiveSpec::Invert(true),
            })
            .collect();
        ChainSpec { chain }
    }
}

fn pole_error(distance: f64) -> Error {
    if distance <= 0.0 {
        Error::Pole
    } else {
        Error::PoleProximity { distance }
    }
}

fn apply_prim(g: &GroupSpec, prim: &Primitive, x: &mut GPoint) {
    match prim {
        Primitive::Translate(b) => *x = g.mul_raw(b, x),
        Primitive::Dilate(r) => *x = g.dilate_raw(*r, x),
        Primitive::Rotate(rot) => rot.apply(&mut x.z),
        Primitive::Invert => {
            if let Some(v) = invert_point(x) {
                *x = v;
            }
        }
    }
}

/// External description of a map; primitives are listed in the order they
/// act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub chain: Vec<PrimitiveSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveSpec {
    Translate(Vec<f64>),
    Dilate(f64),
    RotateTheta(f64),
    RotateMatrix(Vec<Vec<f64>>),
    Invert(bool),
}
