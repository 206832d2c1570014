use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use smallvec::SmallVec;

use crate::conformal::{invert_point, ConformalChain, Primitive};
use crate::error::{Error, Result};
use crate::gdms::{Edge, Gdms, Incidence, ValidationConfig, Vertex};
use crate::group::{neg, GPoint, GroupSpec, Region};
use crate::thermo::{EdgeGenerator, GenShell};

/// `sum_{n >= 1} n^{-s}` for `s > 1`, with an Euler-Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    let n = 1000usize;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
}

/// `phi = l_p o delta_r o l_{J(p)^{-1}} o J`, which sends `o`'s image
/// point `J^{-1}(J(p))` ... i.e. it maps `G` into a small set near `p`.
pub fn cantor_map(group: &Arc<GroupSpec>, p: &GPoint, r: f64) -> Result<ConformalChain> {
    let jp = invert_point(p).ok_or(Error::Pole)?;
    let back = group.inv(&jp)?;
    ConformalChain::new(
        group.clone(),
        vec![
            Primitive::Invert,
            Primitive::Translate(back),
            Primitive::Dilate(r),
            Primitive::Translate(p.clone()),
        ],
    )
}

/// Bucket grid for gauge-distance queries. A point within distance `r`
/// of `p` differs from it by less than `r` in each horizontal coordinate
/// and by less than `r^2 + F |z_p| r` in each vertical one, with `F` the
/// Frobenius norm of the structure matrix. Cells are keyed by a hash of
/// their integer coordinates; collisions only add candidates.
struct Grid {
    cz: f64,
    ct: f64,
    frob: Vec<f64>,
    cells: FxHashMap<u64, Vec<u32>>,
}

fn cell_hash(c: &[i64]) -> u64 {
    c.iter().fold(0u64, |h, &v| {
        (h.rotate_left(7) ^ v as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    })
}

fn frobenius(g: &GroupSpec) -> Vec<f64> {
    g.structure_matrices()
        .iter()
        .map(|b| b.iter().flatten().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

impl Grid {
    /// Cells sized so that a query of radius `r` about a point of norm at
    /// most `rho` touches three cells per coordinate.
    fn new(g: &GroupSpec, r: f64, rho: f64) -> Self {
        let frob = frobenius(g);
        let fmax = frob.iter().copied().fold(0.0, f64::max);
        Grid {
            cz: r,
            ct: r * r + fmax * rho * r,
            frob,
            cells: FxHashMap::default(),
        }
    }

    fn coords(&self, p: &GPoint) -> SmallVec<[i64; 12]> {
        p.z.iter()
            .map(|v| (v / self.cz).floor() as i64)
            .chain(p.t.iter().map(|v| (v / self.ct).floor() as i64))
            .collect()
    }

    fn insert(&mut self, p: &GPoint, idx: u32) {
        let k = cell_hash(&self.coords(p));
        self.cells.entry(k).or_default().push(idx);
    }

    /// Calls `f` on every stored index whose point may lie within `r` of
    /// `p`; stops early when `f` returns false.
    fn visit<F: FnMut(u32) -> bool>(&self, p: &GPoint, r: f64, mut f: F) {
        let zn = p.z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut span: SmallVec<[i64; 12]> = SmallVec::new();
        for _ in &p.z {
            span.push((r / self.cz).ceil() as i64);
        }
        for fr in &self.frob {
            span.push(((r * r + fr * zn * r) / self.ct).ceil() as i64);
        }
        let base = self.coords(p);
        let mut cur: SmallVec<[i64; 12]> = base.iter().zip(&span).map(|(b, s)| b - s).collect();
        loop {
            if let Some(v) = self.cells.get(&cell_hash(&cur)) {
                for &i in v {
                    if !f(i) {
                        return;
                    }
                }
            }
            let mut i = cur.len();
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if cur[i] < base[i] + span[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = base[i] - span[i];
            }
        }
    }
}

/// Random point of the gauge sphere of radius `rho` about `o`, by radial
/// projection of a box sample.
fn sphere_point(g: &GroupSpec, rng: &mut ChaCha8Rng, rho: f64) -> GPoint {
    let mut p = GPoint::origin(g);
    loop {
        for v in p.z.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        for v in p.t.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let n = g.norm(&p);
        if n > 1e-3 {
            return g.dilate_raw(rho / n, &p);
        }
    }
}

/// Point of `S(o, rho)` on the projected segment from `p` to `q` at
/// distance just over `sep` from `p`, given `d(p, q) > sep`.
fn boundary_point(g: &GroupSpec, p: &GPoint, q: &GPoint, rho: f64, sep: f64) -> GPoint {
    let at = |s: f64| {
        let x = GPoint {
            z: p.z.iter().zip(&q.z).map(|(a, b)| a + s * (b - a)).collect(),
            t: p.t.iter().zip(&q.t).map(|(a, b)| a + s * (b - a)).collect(),
        };
        let n = g.norm(&x);
        if n > 0.0 {
            g.dilate_raw(rho / n, &x)
        } else {
            q.clone()
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..14 {
        let m = 0.5 * (lo + hi);
        if g.dist(p, &at(m)) > sep {
            hi = m;
        } else {
            lo = m;
        }
    }
    at(hi)
}

/// Effort knobs of [`pack_sphere`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PackingEffort {
    /// Consecutive rejections ending the global phase.
    pub stall: usize,
    /// Consecutive rejections ending the local phase around one point.
    pub local: usize,
}

impl Default for PackingEffort {
    fn default() -> Self {
        PackingEffort { stall: 64, local: 128 }
    }
}

/// Greedy packing of the gauge sphere `S(o, rho)` at separation `sep`.
/// Global random candidates are tried until `stall` consecutive
/// rejections; then every accepted point, including those accepted
/// later, receives candidates at distance `(sep, 2 sep]` projected back
/// onto the sphere until `local` consecutive rejections.
pub fn pack_sphere(g: &GroupSpec, rho: f64, sep: f64, seed: u64, effort: PackingEffort) -> Vec<GPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = Grid::new(g, sep, rho);
    let mut pts: Vec<GPoint> = Vec::new();
    let try_add = |q: GPoint, pts: &mut Vec<GPoint>, grid: &mut Grid| -> bool {
        let mut free = true;
        grid.visit(&q, sep, |i| {
            if g.dist(&pts[i as usize], &q) < sep {
                free = false;
            }
            free
        });
        if free {
            grid.insert(&q, pts.len() as u32);
            pts.push(q);
        }
        free
    };
    let mut misses = 0;
    while misses < effort.stall {
        let q = sphere_point(g, &mut rng, rho);
        if try_add(q, &mut pts, &mut grid) {
            misses = 0;
        } else {
            misses += 1;
        }
    }
    // Local checks run in the frame of the centre p, where a point within
    // sep of the candidate is also within sep in each horizontal
    // coordinate. Conflicts of candidates within 2 sep of p lie within
    // 3 sep of p.
    let mut frame: Vec<GPoint> = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let p = pts[i].clone();
        let pinv = neg(&p);
        frame.clear();
        grid.visit(&p, 3.0 * sep, |j| {
            let f = g.mul_raw(&pinv, &pts[j as usize]);
            if g.norm(&f) < 3.0 * sep {
                frame.push(f);
            }
            true
        });
        for k in 0..effort.local {
            let u = sphere_point(g, &mut rng, 1.0);
            let s = sep * rng.gen_range(1.0..=2.0);
            let q = g.mul_raw(&p, &g.dilate_raw(s, &u));
            let n = g.norm(&q);
            if n == 0.0 {
                continue;
            }
            let mut q = g.dilate_raw(rho / n, &q);
            // three candidates in four are moved onto S(p, sep), where
            // the thin gaps left between accepted points touch
            if k % 4 != 0 && g.dist(&p, &q) > sep {
                q = boundary_point(g, &p, &q, rho, sep);
            }
            let fq = g.mul_raw(&pinv, &q);
            let r = g.norm(&fq);
            if r < sep {
                continue;
            }
            if r >= 2.0 * sep {
                if try_add(q, &mut pts, &mut grid) && r < 3.0 * sep {
                    frame.push(fq);
                }
                continue;
            }
            let blocked = frame.iter().any(|f| {
                f.z.iter().zip(&fq.z).all(|(a, b)| (a - b).abs() < sep) && g.dist(f, &fq) < sep
            });
            if !blocked {
                grid.insert(&q, pts.len() as u32);
                pts.push(q);
                frame.push(fq);
            }
        }
        i += 1;
    }
    pts
}

/// Number of `trials` random sphere points farther than `sep` from every
/// packed point; zero means the packing passed the maximality check.
pub fn packing_gaps(g: &GroupSpec, pts: &[GPoint], rho: f64, sep: f64, trials: usize, seed: u64) -> usize {
    let mut grid = Grid::new(g, sep, rho);
    for (i, p) in pts.iter().enumerate() {
        grid.insert(p, i as u32);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .filter(|_| {
            let q = sphere_point(g, &mut rng, rho);
            let mut hit = false;
            grid.visit(&q, sep, |i| {
                hit = g.dist(&pts[i as usize], &q) < sep;
                !hit
            });
            !hit
        })
        .count()
}

/// Conformal Cantor system built from shells: `Pi_n` packs the sphere of
/// radius `sum_{j <= n} j^{-epsilon}` at separation `(n + 2)^{-epsilon}`
/// and the maps use radii `d_k / (10 d_0)`.
#[derive(Debug, Clone, Serialize)]
pub struct CantorShellParams {
    pub epsilon: f64,
    pub shells: usize,
    pub seed: u64,
    pub effort: PackingEffort,
}

#[derive(Debug, Clone)]
pub struct CantorShells {
    pub group: Arc<GroupSpec>,
    pub params: CantorShellParams,
    /// Points per shell.
    pub points: Vec<Vec<GPoint>>,
    /// Nearest-neighbour distance of each point, per shell.
    pub nearest: Vec<Vec<f64>>,
    /// `diam J(G)`.
    pub d0: f64,
    /// The domain `G = B(o, zeta(epsilon) + 1) \ B(o, 1/2)`.
    pub domain: Region,
}

/// Coarse count `(n + 2)^{epsilon (Q - 1)}` of shell `n`.
pub fn shell_count_rate(g: &GroupSpec, epsilon: f64, n: usize) -> f64 {
    ((n + 2) as f64).powf(epsilon * (g.homogeneous_dim() as f64 - 1.0))
}

impl CantorShells {
    pub fn build(group: Arc<GroupSpec>, params: &CantorShellParams, budget: u64) -> Result<Self> {
        let eps = params.epsilon;
        if !(eps > 1.0 && eps.is_finite()) {
            return Err(Error::Validation(format!("epsilon must exceed 1, got {eps}")));
        }
        if params.shells == 0 {
            return Err(Error::Validation("need at least one shell".into()));
        }
        let est: f64 = (1..=params.shells)
            .map(|n| 8.0 * shell_count_rate(&group, eps, n))
            .sum();
        if est > budget as f64 {
            return Err(Error::BudgetExceeded {
                what: "Cantor shell points".into(),
                estimate: est,
                budget,
            });
        }
        let outer = zeta(eps) + 1.0;
        let domain = Region::Annulus {
            center: GPoint::origin(&group),
            inner: 0.5,
            outer,
        };
        // J maps the annulus onto the annulus of radii (1/outer, 2), whose
        // diameter 2 * 2 is attained by antipodal horizontal points
        let d0 = 4.0;
        let radii: Vec<f64> = (1..=params.shells)
            .scan(0.0, |rho, n| {
                *rho += (n as f64).powf(-eps);
                Some(*rho)
            })
            .collect();
        // shells are independent and seeded separately
        let points: Vec<Vec<GPoint>> = radii
            .par_iter()
            .enumerate()
            .map(|(k, &rho)| {
                let n = k + 1;
                let sep = ((n + 2) as f64).powf(-eps);
                let seed = params.seed.wrapping_add(n as u64);
                pack_sphere(&group, rho, sep, seed, params.effort)
            })
            .collect();
        for (k, pts) in points.iter().enumerate() {
            if pts.is_empty() {
                return Err(Error::Validation(format!("shell {} received no points", k + 1)));
            }
            info!("Cantor shell {}: {} points", k + 1, pts.len());
        }
        let nearest = nearest_distances(&group, &points, &radii, eps);
        Ok(CantorShells {
            group,
            params: params.clone(),
            points,
            nearest,
            d0,
            domain,
        })
    }

    pub fn ratio(&self, shell: usize, k: usize) -> f64 {
        self.nearest[shell][k] / (10.0 * self.d0)
    }

    /// `(log w_lo, log w_up)`: on `G` the derivative `r / ||p||^2` ranges
    /// over `[r / outer^2, 4 r]`.
    pub fn log_weights(&self, r: f64) -> (f64, f64) {
        let outer = self.domain.outer_radius();
        ((r / (outer * outer)).ln(), (4.0 * r).ln())
    }

    pub fn edge_count(&self) -> usize {
        self.points.iter().map(Vec::len).sum()
    }

    pub fn system(&self, cfg: &ValidationConfig) -> Result<Gdms> {
        let g = &self.group;
        let mut edges = Vec::with_capacity(self.edge_count());
        for (n, shell) in self.points.iter().enumerate() {
            for (k, p) in shell.iter().enumerate() {
                edges.push(Edge {
                    id: format!("s{}_{}", n + 1, k),
                    from: 0,
                    to: 0,
                    map: cantor_map(g, p, self.ratio(n, k))?,
                });
            }
        }
        let vertex = Vertex {
            id: "G".into(),
            region: self.domain.clone(),
        };
        Gdms::new(g.clone(), vec![vertex], edges, Incidence::Maximal, None, cfg)
    }
}

/// Nearest-neighbour distances over all shells. Points of shell `n` are
/// at least `(n + 1)^{-epsilon}` from shell `n + 1`, so only adjacent
/// shells are searched, and only when the in-shell distance is larger.
fn nearest_distances(g: &GroupSpec, points: &[Vec<GPoint>], radii: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let grids: Vec<Grid> = points
        .iter()
        .enumerate()
        .map(|(n, pts)| {
            let c = 4.0 * ((n + 2) as f64).powf(-eps);
            let mut gr = Grid::new(g, c, radii[n]);
            for (i, p) in pts.iter().enumerate() {
                gr.insert(p, i as u32);
            }
            gr
        })
        .collect();
    let search = |m: usize, p: &GPoint, r: f64, skip: Option<usize>| -> f64 {
        let mut best = f64::INFINITY;
        grids[m].visit(p, r, |i| {
            if Some(i as usize) != skip {
                best = best.min(g.dist(&points[m][i as usize], p));
            }
            true
        });
        best
    };
    points
        .iter()
        .enumerate()
        .map(|(n, pts)| {
            let sep = ((n + 2) as f64).powf(-eps);
            pts.iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut best = search(n, p, 4.0 * sep, Some(i));
                    if !best.is_finite() {
                        // isolated point: widen the search
                        let mut r = 8.0 * sep;
                        while !best.is_finite() && r < 4.0 * radii[n] && pts.len() > 1 {
                            best = search(n, p, r, Some(i));
                            r *= 2.0;
                        }
                    }
                    let mut lim = best;
                    for m in [n.wrapping_sub(1), n + 1] {
                        if m < points.len() {
                            let gap = ((n.max(m)) as f64).powf(-eps);
                            if lim.is_finite() && gap < lim {
                                lim = lim.min(search(m, p, lim, None));
                            }
                        }
                    }
                    if !lim.is_finite() {
                        warn!("point without neighbours in shell {}", n + 1);
                        lim = sep;
                    }
                    lim
                })
                .collect()
        })
        .collect()
}

/// Generator for the infinite shell system; shell `n` has scale `n + 2`.
pub struct CantorGenerator {
    pub group: Arc<GroupSpec>,
    pub epsilon: f64,
    pub seed: u64,
    pub effort: PackingEffort,
}

impl EdgeGenerator for CantorGenerator {
    fn name(&self) -> String {
        format!("cantor(epsilon={})", self.epsilon)
    }

    fn shells(&self, count: usize, budget: u64) -> Result<Vec<GenShell>> {
        let params = CantorShellParams {
            epsilon: self.epsilon,
            shells: count,
            seed: self.seed,
            effort: self.effort,
        };
        let cs = CantorShells::build(self.group.clone(), &params, budget)?;
        Ok((0..count)
            .map(|n| {
                let lw: Vec<f64> = (0..cs.points[n].len())
                    .map(|k| {
                        let (a, b) = cs.log_weights(cs.ratio(n, k));
                        0.5 * (a + b)
                    })
                    .collect();
                let len = lw.len();
                let s = (n + 3) as f64;
                GenShell {
                    scale_lo: s - 0.5,
                    scale_hi: s + 0.5,
                    log_weights: lw,
                    counts: vec![1.0; len],
                }
            })
            .collect())
    }
}

/// A Cantor system from explicit points and radii on a domain `G` with
/// `o` outside its closure. Requires `r_n < d_n / (2 d_0)` where `d_0`
/// is the sampled diameter of `J(G)`.
pub fn build_cantor_generic(
    group: Arc<GroupSpec>,
    points: &[GPoint],
    radii: &[f64],
    domain: Region,
    cfg: &ValidationConfig,
) -> Result<Gdms> {
    if points.len() != radii.len() || points.is_empty() {
        return Err(Error::Validation("need one radius per point".into()));
    }
    domain.validate(&group)?;
    let o = GPoint::origin(&group);
    let (omin, _) = domain.dist_range(&group, &o);
    if omin <= 0.0 {
        return Err(Error::Validation("the origin must lie outside the domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let img: Vec<GPoint> = domain
        .sample(&group, &mut rng, 400)
        .iter()
        .filter_map(invert_point)
        .collect();
    let mut d0: f64 = 0.0;
    for (i, a) in img.iter().enumerate() {
        for b in &img[i + 1..] {
            d0 = d0.max(group.dist(a, b));
        }
    }
    let mut edges = Vec::with_capacity(points.len());
    for (n, (p, &r)) in points.iter().zip(radii).enumerate() {
        let dn = points
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != n)
            .map(|(_, q)| group.dist(p, q))
            .fold(f64::INFINITY, f64::min);
        let cap = if dn.is_finite() { dn / (2.0 * d0) } else { f64::INFINITY };
        if !(r > 0.0 && r < 1.0 && r < cap) {
            return Err(Error::Validation(format!(
                "radius {r} of point {n} must lie in (0, min(1, {cap}))"
            )));
        }
        edges.push(Edge {
            id: format!("p{n}"),
            from: 0,
            to: 0,
            map: cantor_map(&group, p, r)?,
        });
    }
    let vertex = Vertex {
        id: "G".into(),
        region: domain,
    };
    Gdms::new(group, vec![vertex], edges, Incidence::Maximal, None, cfg)
}
