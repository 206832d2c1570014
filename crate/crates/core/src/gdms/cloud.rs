use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Gdms, Word};
use crate::error::{Error, Result};
use crate::group::GPoint;
use crate::linalg;

/// Starting point for evaluating a finite word.
#[derive(Debug, Clone)]
pub enum Anchor {
    VertexCenter,
    Given(GPoint),
}

/// `phi_w(anchor)` together with `s^n max diam X_v`, which bounds the
/// distance to every limit point coded by an extension of `w`.
pub fn coding_point(sys: &Gdms, w: &Word, anchor: &Anchor) -> Result<(GPoint, f64)> {
    sys.check_word(w)?;
    let g = sys.group();
    let start = match (w.0.last(), anchor) {
        (Some(&e), Anchor::VertexCenter) => sys.vertices()[sys.edges()[e].to].region.center().clone(),
        (None, Anchor::VertexCenter) if sys.vertices().len() == 1 => {
            sys.vertices()[0].region.center().clone()
        }
        (None, Anchor::VertexCenter) => {
            return Err(Error::invalid("the empty word has no terminal vertex"))
        }
        (last, Anchor::Given(p)) => {
            g.check(p)?;
            if let Some(&e) = last {
                let dom = &sys.vertices()[sys.edges()[e].to].region;
                if !dom.contains(g, p, crate::group::DEFAULT_TOL) {
                    return Err(Error::invalid("anchor lies outside the domain of the word"));
                }
            }
            p.clone()
        }
    };
    let x = eval_word(sys, &w.0, start)?;
    Ok((x, error_bound(sys, w.len())))
}

fn error_bound(sys: &Gdms, n: usize) -> f64 {
    sys.contraction().powi(n as i32) * sys.max_diam()
}

fn eval_word(sys: &Gdms, w: &[usize], start: GPoint) -> Result<GPoint> {
    let mut x = start;
    for &e in w.iter().rev() {
        x = sys.edges()[e].map.apply_unchecked(&x)?;
    }
    Ok(x)
}

/// How random words are drawn in the chaos game.
#[derive(Debug, Clone, PartialEq)]
pub enum WordDistribution {
    /// Uniform first edge, then uniform among allowed successors.
    Uniform,
    /// Transition matrix on edges; the first edge follows its stationary
    /// vector.
    Markov(Vec<Vec<f64>>),
}

impl WordDistribution {
    pub fn validate(&self, sys: &Gdms) -> Result<()> {
        if let WordDistribution::Markov(p) = self {
            let ne = sys.edges().len();
            if p.len() != ne || p.iter().any(|r| r.len() != ne) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{ne}x{ne} transition matrix"),
                    got: format!("{} rows", p.len()),
                });
            }
            for (a, row) in p.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::invalid(format!("row {a} of the transition matrix is not stochastic")));
                }
                for (b, &v) in row.iter().enumerate() {
                    if v > 0.0 && !sys.allowed(a, b) {
                        return Err(Error::invalid(format!(
                            "transition {a} -> {b} is not allowed by the incidence matrix"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CloudMode {
    Deterministic,
    /// Random words; sample block `b` (of [`CHAOS_BLOCK`] samples) draws from
    /// a ChaCha8 generator seeded with `seed` on stream `b`.
    ChaosGame {
        samples: usize,
        seed: u64,
        distribution: WordDistribution,
    },
}

pub const CHAOS_BLOCK: usize = 1024;

/// Points of a limit-set approximation with per-point error bounds.
#[derive(Debug, Clone)]
pub struct Cloud {
    pub m1: usize,
    pub m2: usize,
    pub points: Vec<GPoint>,
    pub errors: Vec<f64>,
}

pub fn limit_set_cloud(sys: &Gdms, depth: usize, mode: &CloudMode, budget: u64) -> Result<Cloud> {
    let g = sys.group();
    let (points, errors) = match mode {
        CloudMode::Deterministic if depth == 0 => {
            let pts: Vec<_> = sys.vertices().iter().map(|v| v.region.center().clone()).collect();
            let errs = sys.vertices().iter().map(|v| v.region.diam()).collect();
            (pts, errs)
        }
        CloudMode::Deterministic => {
            let words: Vec<Word> = sys.admissible_words(depth, budget)?.collect();
            let pts = words
                .par_iter()
                .map(|w| coding_point(sys, w, &Anchor::VertexCenter).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?;
            let err = error_bound(sys, depth);
            let n = pts.len();
            (pts, vec![err; n])
        }
        CloudMode::ChaosGame {
            samples,
            seed,
            distribution,
        } => {
            if *samples as u64 > budget {
                return Err(Error::BudgetExceeded {
                    what: "chaos game samples".into(),
                    estimate: *samples as f64,
                    budget,
                });
            }
            distribution.validate(sys)?;
            let sampler = Sampler::new(sys, distribution)?;
            let blocks = samples.div_ceil(CHAOS_BLOCK);
            let chunks = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(b as u64);
                    let count = CHAOS_BLOCK.min(samples - b * CHAOS_BLOCK);
                    let mut out = Vec::with_capacity(count);
                    for _ in 0..count {
                        let w = sampler.draw(&mut rng, depth)?;
                        let start = match w.last() {
                            Some(&e) => sys.vertices()[sys.edges()[e].to].region.center().clone(),
                            None => sys.vertices()[0].region.center().clone(),
                        };
                        out.push(eval_word(sys, &w, start)?);
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            let pts: Vec<GPoint> = chunks.into_iter().flatten().collect();
            let err = error_bound(sys, depth);
            let n = pts.len();
            (pts, vec![err; n])
        }
    };
    Ok(Cloud {
        m1: g.m1(),
        m2: g.m2(),
        points,
        errors,
    })
}

struct Sampler<'a> {
    sys: &'a Gdms,
    first: Option<WeightedIndex<f64>>,
    rows: Vec<Option<WeightedIndex<f64>>>,
}

impl<'a> Sampler<'a> {
    fn new(sys: &'a Gdms, dist: &WordDistribution) -> Result<Self> {
        match dist {
            WordDistribution::Uniform => Ok(Sampler {
                sys,
                first: None,
                rows: Vec::new(),
            }),
            WordDistribution::Markov(p) => {
                let pi = linalg::stationary(p)?;
                let first = WeightedIndex::new(&pi).map_err(|e| Error::invalid(e.to_string()))?;
                let rows = p.iter().map(|r| WeightedIndex::new(r).ok()).collect();
                Ok(Sampler {
                    sys,
                    first: Some(first),
                    rows,
                })
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        let ne = self.sys.edges().len();
        'attempt: for _ in 0..1000 {
            let mut w = Vec::with_capacity(n);
            for k in 0..n {
                let e = match (&self.first, k) {
                    (None, 0) => rng.gen_range(0..ne),
                    (None, _) => {
                        let s = self.sys.successors(w[k - 1]);
                        if s.is_empty() {
                            continue 'attempt;
                        }
                        s[rng.gen_range(0..s.len())]
                    }
                    (Some(f), 0) => f.sample(rng),
                    (Some(_), _) => match &self.rows[w[k - 1]] {
                        Some(r) => r.sample(rng),
                        None => continue 'attempt,
                    },
                };
                w.push(e);
            }
            return Ok(w);
        }
        Err(Error::NonConvergence("random words keep reaching dead ends".into()))
    }
}

impl Cloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `z1..z_m1,t1..t_m2,err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head: Vec<String> = (1..=self.m1).map(|i| format!("z{i}")).collect();
        head.extend((1..=self.m2).map(|i| format!("t{i}")));
        head.push("err".into());
        writeln!(w, "{}", head.join(","))?;
        for (p, e) in self.points.iter().zip(&self.errors) {
            let mut row: Vec<String> = p.z.iter().chain(p.t.iter()).map(|v| format!("{v}")).collect();
            row.push(format!("{e:e}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// ASCII PLY with the first three coordinates of each point.
    pub fn write_ply<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.points.len())?;
        for name in ["x", "y", "z"] {
            writeln!(w, "property double {name}")?;
        }
        writeln!(w, "end_header")?;
        for p in &self.points {
            let c: Vec<f64> = p.z.iter().chain(p.t.iter()).copied().chain([0.0; 3]).take(3).collect();
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}
