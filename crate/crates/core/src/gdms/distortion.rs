use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Gdms;
use crate::error::Result;
use crate::group::GPoint;

const SAMPLES_PER_VERTEX: usize = 64;
const TOP_EDGES: usize = 8;
const MAX_DEPTH: usize = 4;
const SAFETY: f64 = 1.1;

fn vertex_samples(sys: &Gdms, seed: u64) -> Vec<Vec<GPoint>> {
    sys.vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut pts = vec![v.region.center().clone()];
            pts.extend(v.region.sample(sys.group(), &mut rng, SAMPLES_PER_VERTEX));
            pts
        })
        .collect()
}

fn word_deriv(sys: &Gdms, w: &[usize], p: &GPoint) -> Result<f64> {
    let mut x = p.clone();
    let mut d = 1.0;
    for &e in w.iter().rev() {
        let (y, de) = sys.edges()[e].map.apply_with_deriv(&x)?;
        x = y;
        d *= de;
    }
    Ok(d)
}

fn ratio(sys: &Gdms, w: &[usize], pts: &[GPoint]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in pts {
        let d = word_deriv(sys, w, p)?;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(hi / lo)
}

/// Bounded-distortion constant estimated as 1.1 times the largest ratio
/// `||D phi_w(p)|| / ||D phi_w(q)||` seen over sample points of the
/// vertex sets: all single edges, plus words of length 2 to 4 over the
/// eight edges with the largest derivative. Similarity systems get 1.
pub fn distortion_estimate(sys: &Gdms, seed: u64) -> Result<f64> {
    if sys.edges().iter().all(|e| e.map.is_similarity()) {
        return Ok(1.0);
    }
    let samples = vertex_samples(sys, seed);
    let single: Vec<Result<(f64, f64)>> = sys
        .edges()
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let pts = &samples[e.to];
            let r = ratio(sys, &[i], pts)?;
            let at_center = e.map.deriv_norm_at(&pts[0])?;
            Ok((r, at_center))
        })
        .collect();
    let mut worst: f64 = 1.0;
    let mut order = Vec::with_capacity(single.len());
    for (i, s) in single.into_iter().enumerate() {
        let (r, w) = s?;
        worst = worst.max(r);
        order.push((w, i));
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let top: Vec<usize> = order.iter().take(TOP_EDGES).map(|x| x.1).collect();
    let mut words: Vec<Vec<usize>> = top.iter().map(|&e| vec![e]).collect();
    for _ in 2..=MAX_DEPTH {
        let mut next = Vec::new();
        for w in &words {
            let last = *w.last().unwrap();
            for &b in &top {
                if sys.allowed(last, b) {
                    let mut v = w.clone();
                    v.push(b);
                    next.push(v);
                }
            }
        }
        let ratios: Vec<Result<f64>> = next
            .par_iter()
            .map(|w| ratio(sys, w, &samples[sys.edges()[*w.last().unwrap()].to]))
            .collect();
        for r in ratios {
            worst = worst.max(r?);
        }
        words = next;
    }
    Ok(SAFETY * worst)
}

/// Outcome of the sampled open set condition check.
#[derive(Debug, Clone, Serialize)]
pub struct OscReport {
    pub pairs_checked: usize,
    pub pairs_skipped: usize,
    pub violations: usize,
}

/// For sibling edges `e != f` with a common initial vertex, checks whether
/// sampled points of `phi_e(int X_{to(e)})` land inside
/// `phi_f(int X_{to(f)})`. A diagnostic, not a proof.
pub fn osc_diagnostic(sys: &Gdms, samples: usize, max_pairs: usize, seed: u64) -> Result<OscReport> {
    let g = sys.group();
    let inverses = sys
        .edges()
        .iter()
        .map(|e| e.map.invert_chain())
        .collect::<Result<Vec<_>>>()?;
    let pts = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sys.vertices()
            .iter()
            .map(|v| {
                let mut s = v.region.sample(g, &mut rng, samples);
                // keep interior points only
                let c = v.region.center();
                let r = v.region.outer_radius();
                s.retain(|p| g.dist(c, p) < r * (1.0 - 1e-9));
                s
            })
            .collect::<Vec<_>>()
    };
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for v in 0..sys.vertices().len() {
        let sib = sys.edges_from(v);
        for (i, &e) in sib.iter().enumerate() {
            for &f in &sib[i + 1..] {
                if pairs.len() < max_pairs {
                    pairs.push((e, f));
                } else {
                    skipped += 1;
                }
            }
        }
    }
    let inside = |f: usize, q: &GPoint| -> bool {
        let dom = &sys.vertices()[sys.edges()[f].to].region;
        match inverses[f].apply_unchecked(q) {
            Ok(x) => g.dist(dom.center(), &x) < dom.outer_radius() * (1.0 - 1e-9),
            Err(_) => false,
        }
    };
    let violations: usize = pairs
        .par_iter()
        .map(|&(e, f)| {
            let bad = |a: usize, b: usize| {
                pts[sys.edges()[a].to].iter().any(|p| {
                    sys.edges()[a]
                        .map
                        .apply_unchecked(p)
                        .is_ok_and(|q| inside(b, &q))
                })
            };
            usize::from(bad(e, f) || bad(f, e))
        })
        .sum();
    Ok(OscReport {
        pairs_checked: pairs.len(),
        pairs_skipped: skipped,
        violations,
    })
}
