//! Graph directed Markov systems over conformal maps.
//!
//! Edge `e` carries a map `phi_e : X_{to(e)} -> X_{from(e)}`; a word
//! `e_1 e_2 ... e_n` is admissible when each consecutive pair is allowed by
//! the incidence relation, and then `phi_{e_1} o ... o phi_{e_n}` is defined.

mod cloud;
mod distortion;
mod spec;
mod words;

pub use cloud::{coding_point, limit_set_cloud, Anchor, Cloud, CloudMode, WordDistribution};
pub use distortion::{distortion_estimate, osc_diagnostic, OscReport};
pub use spec::{EdgeSpec, IncidenceSpec, SystemSpec, VertexSpec, SPEC_VERSION};
pub use words::{Word, Words};

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conformal::{Bracketed, ConformalChain, SupNormStrategy};
use crate::error::{Error, Result};
use crate::group::{GroupSpec, Region};

#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: String,
    pub region: Region,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub map: ConformalChain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Incidence {
    /// `a b` is admissible iff `to(a) = from(b)`.
    Maximal,
    Explicit(Vec<Vec<bool>>),
}

/// Sampled checks run when a system is built.
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub points_per_edge: usize,
    pub seed: u64,
    pub tol: f64,
    pub check_disjoint: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            points_per_edge: 1000,
            seed: 0x5eed,
            tol: 1e-9,
            check_disjoint: true,
        }
    }
}

/// A validated finite system.
#[derive(Debug, Clone)]
pub struct Gdms {
    group: Arc<GroupSpec>,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incidence: Incidence,
    s: f64,
    all_edges: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    edges_from: Vec<Vec<usize>>,
    edges_to: Vec<Vec<usize>>,
    truncation: Option<f64>,
}

impl Gdms {
    /// Builds and validates a system. When `contraction` is `None` the bound
    /// `s` is taken as 1.1 times the largest per-edge Lipschitz estimate.
    pub fn new(
        group: Arc<GroupSpec>,
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        incidence: Incidence,
        contraction: Option<f64>,
        cfg: &ValidationConfig,
    ) -> Result<Self> {
        let mut sys = Self::assemble(group, vertices, edges, incidence, 0.5)?;
        let lip = sys.validate(cfg)?;
        let s = match contraction {
            Some(s) => {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::Validation(format!("contraction bound {s} not in (0,1)")));
                }
                if lip > s * (1.0 + cfg.tol) {
                    return Err(Error::Validation(format!(
                        "Lipschitz estimate {lip} exceeds contraction bound {s}"
                    )));
                }
                s
            }
            None => {
                let s = (1.1 * lip).max(f64::MIN_POSITIVE);
                if s >= 1.0 {
                    return Err(Error::Validation(format!(
                        "maps are not uniformly contracting (Lipschitz estimate {lip})"
                    )));
                }
                s
            }
        };
        sys.s = s;
        Ok(sys)
    }

    fn assemble(
        group: Arc<GroupSpec>,
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        incidence: Incidence,
        s: f64,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Validation("system has no vertices".into()));
        }
        if edges.is_empty() {
            return Err(Error::Validation("system has no edges".into()));
        }
        let nv = vertices.len();
        let ne = edges.len();
        for v in &vertices {
            v.region.validate(&group)?;
        }
        let mut edges_from = vec![Vec::new(); nv];
        let mut edges_to = vec![Vec::new(); nv];
        for (i, e) in edges.iter().enumerate() {
            if e.from >= nv || e.to >= nv {
                return Err(Error::Validation(format!("edge '{}' has a bad vertex", e.id)));
            }
            if **e.map.group() != *group {
                return Err(Error::Validation(format!("edge '{}' lives on another group", e.id)));
            }
            edges_from[e.from].push(i);
            edges_to[e.to].push(i);
        }
        let (succ, pred) = match &incidence {
            Incidence::Maximal => (Vec::new(), Vec::new()),
            Incidence::Explicit(a) => {
                if a.len() != ne || a.iter().any(|r| r.len() != ne) {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{ne}x{ne} incidence matrix"),
                        got: format!("{} rows", a.len()),
                    });
                }
                let mut succ = vec![Vec::new(); ne];
                let mut pred = vec![Vec::new(); ne];
                for (x, row) in a.iter().enumerate() {
                    for (y, &on) in row.iter().enumerate() {
                        if on {
                            if edges[x].to != edges[y].from {
                                return Err(Error::Validation(format!(
                                    "incidence allows '{}' '{}' but t({}) != i({})",
                                    edges[x].id, edges[y].id, edges[x].id, edges[y].id
                                )));
                            }
                            succ[x].push(y);
                            pred[y].push(x);
                        }
                    }
                }
                (succ, pred)
            }
        };
        Ok(Gdms {
            group,
            vertices,
            edges,
            incidence,
            s,
            all_edges: (0..ne).collect(),
            succ,
            pred,
            edges_from,
            edges_to,
            truncation: None,
        })
    }

    /// Returns the largest per-edge Lipschitz estimate.
    fn validate(&self, cfg: &ValidationConfig) -> Result<f64> {
        let g = &self.group;
        if cfg.check_disjoint {
            for (i, a) in self.vertices.iter().enumerate() {
                for b in &self.vertices[i + 1..] {
                    let d = g.dist(a.region.center(), b.region.center());
                    if d <= a.region.outer_radius() + b.region.outer_radius() {
                        return Err(Error::Validation(format!(
                            "vertex sets '{}' and '{}' are not disjoint",
                            a.id, b.id
                        )));
                    }
                }
            }
        }
        let lips: Vec<Result<f64>> = self
            .edges
            .par_iter()
            .enumerate()
            .map(|(i, e)| self.validate_edge(i, e, cfg))
            .collect();
        let mut worst: f64 = 0.0;
        for l in lips {
            worst = worst.max(l?);
        }
        Ok(worst)
    }

    fn validate_edge(&self, i: usize, e: &Edge, cfg: &ValidationConfig) -> Result<f64> {
        let g = &self.group;
        let dom = &self.vertices[e.to].region;
        let cod = &self.vertices[e.from].region;
        let exact = e.map.inversions() <= 1;
        let certified = exact
            && e.map.image_ball(dom).is_ok_and(|(c, r)| {
                let d = g.dist(cod.center(), &c);
                let inner = match cod {
                    Region::Ball { .. } => 0.0,
                    Region::Annulus { inner, .. } => *inner,
                };
                d + r <= cod.outer_radius() + cfg.tol && (inner == 0.0 || d - r >= inner - cfg.tol)
            });
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let need_samples = !certified || !exact;
        let pts = if need_samples {
            dom.sample(g, &mut rng, cfg.points_per_edge.max(2))
        } else {
            Vec::new()
        };
        if !certified {
            for p in &pts {
                let q = e.map.apply_unchecked(p).map_err(|err| {
                    Error::Validation(format!("edge '{}' has a pole on its domain: {err}", e.id))
                })?;
                if !cod.contains(g, &q, cfg.tol) {
                    return Err(Error::Validation(format!(
                        "edge '{}' does not map X_{} into X_{}",
                        e.id, self.vertices[e.to].id, self.vertices[e.from].id
                    )));
                }
            }
        }
        if exact {
            // for Mobius maps the derivative bound is a Lipschitz bound
            let (_, up) = Bracketed.bounds(&e.map, dom).map_err(|err| {
                Error::Validation(format!("edge '{}': {err}", e.id))
            })?;
            return Ok(up);
        }
        let imgs: Vec<_> = pts
            .iter()
            .map(|p| e.map.apply_unchecked(p))
            .collect::<Result<_>>()?;
        let mut lip: f64 = 0.0;
        for k in 0..pts.len() {
            let j = (k * 7 + 1) % pts.len();
            let d = g.dist(&pts[k], &pts[j]);
            if d > 0.0 {
                lip = lip.max(g.dist(&imgs[k], &imgs[j]) / d);
            }
        }
        Ok(lip)
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incidence(&self) -> &Incidence {
        &self.incidence
    }

    pub fn contraction(&self) -> f64 {
        self.s
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub fn with_truncation(mut self, radius: f64) -> Self {
        self.truncation = Some(radius);
        self
    }

    pub fn is_maximal(&self) -> bool {
        self.incidence == Incidence::Maximal
    }

    pub fn max_diam(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.region.diam())
            .fold(0.0, f64::max)
    }

    /// Edges that may follow `a`, in increasing order.
    pub fn successors(&self, a: usize) -> &[usize] {
        match self.incidence {
            Incidence::Maximal => &self.edges_from[self.edges[a].to],
            Incidence::Explicit(_) => &self.succ[a],
        }
    }

    /// Edges that may precede `b`, in increasing order.
    pub fn predecessors(&self, b: usize) -> &[usize] {
        match self.incidence {
            Incidence::Maximal => &self.edges_to[self.edges[b].from],
            Incidence::Explicit(_) => &self.pred[b],
        }
    }

    pub fn allowed(&self, a: usize, b: usize) -> bool {
        match &self.incidence {
            Incidence::Maximal => self.edges[a].to == self.edges[b].from,
            Incidence::Explicit(m) => m[a][b],
        }
    }

    pub fn edges_from(&self, v: usize) -> &[usize] {
        &self.edges_from[v]
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        for &e in &w.0 {
            if e >= self.edges.len() {
                return Err(Error::Inadmissible(format!("no edge with index {e}")));
            }
        }
        for pair in w.0.windows(2) {
            if !self.allowed(pair[0], pair[1]) {
                return Err(Error::Inadmissible(format!(
                    "'{}' cannot be followed by '{}'",
                    self.edges[pair[0]].id, self.edges[pair[1]].id
                )));
            }
        }
        Ok(())
    }

    /// `phi_{w_1} o ... o phi_{w_n}`.
    pub fn word_map(&self, w: &Word) -> Result<ConformalChain> {
        self.check_word(w)?;
        let mut out = ConformalChain::identity(self.group.clone());
        for &e in w.0.iter().rev() {
            out = self.edges[e].map.compose(&out)?;
        }
        Ok(out)
    }

    /// Number of admissible words of length `n`, as a float so huge counts
    /// do not overflow.
    pub fn word_count(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self.incidence {
            Incidence::Maximal => {
                // words ending at each vertex, counted through the vertex graph
                let nv = self.vertices.len();
                let mut c: Vec<f64> = (0..nv).map(|v| self.edges_from[v].len() as f64).collect();
                for _ in 1..n {
                    let mut next = vec![0.0; nv];
                    for e in &self.edges {
                        next[e.from] += c[e.to];
                    }
                    c = next;
                }
                // c[v] counts words whose first edge starts at v
                c.iter().sum()
            }
            Incidence::Explicit(_) => {
                let mut c = vec![1.0; self.edges.len()];
                for _ in 1..n {
                    let next: Vec<f64> = (0..self.edges.len())
                        .map(|a| self.succ[a].iter().map(|&b| c[b]).sum())
                        .collect();
                    c = next;
                }
                c.iter().sum()
            }
        }
    }

    /// Admissible words of length `n` in lexicographic edge order.
    pub fn admissible_words(&self, n: usize, budget: u64) -> Result<Words<'_>> {
        let count = self.word_count(n);
        if count > budget as f64 {
            return Err(Error::BudgetExceeded {
                what: format!("words of length {n}"),
                estimate: count,
                budget,
            });
        }
        Ok(Words::new(self, Vec::new(), n))
    }

    pub(crate) fn all_edges(&self) -> &[usize] {
        &self.all_edges
    }

    /// Strong connectivity of the edge graph, with a witness set `Phi`.
    pub fn finite_irreducibility(&self) -> Irreducibility {
        match self.incidence {
            Incidence::Maximal => self.irreducibility_maximal(),
            Incidence::Explicit(_) => self.irreducibility_explicit(),
        }
    }

    fn irreducibility_maximal(&self) -> Irreducibility {
        let nv = self.vertices.len();
        // shortest edge paths between vertices, path[u][v] = edges from u to v
        let mut witness: Vec<Word> = Vec::new();
        let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
        let starts: Vec<usize> = (0..nv).filter(|&v| !self.edges_to[v].is_empty()).collect();
        let ends: Vec<usize> = (0..nv).filter(|&v| !self.edges_from[v].is_empty()).collect();
        for &u in &starts {
            let mut back: Vec<Option<Option<usize>>> = vec![None; nv];
            back[u] = Some(None);
            let mut q = VecDeque::from([u]);
            while let Some(x) = q.pop_front() {
                for &e in &self.edges_from[x] {
                    let y = self.edges[e].to;
                    if back[y].is_none() {
                        back[y] = Some(Some(e));
                        q.push_back(y);
                    }
                }
            }
            for &v in &ends {
                if back[v].is_none() {
                    let a = self.edges_to[u][0];
                    let b = self.edges_from[v][0];
                    return Irreducibility::Reducible { from: a, to: b };
                }
                let mut path = Vec::new();
                let mut y = v;
                while let Some(Some(e)) = back[y] {
                    path.push(e);
                    y = self.edges[e].from;
                }
                path.reverse();
                if seen.insert(path.clone(), ()).is_none() {
                    witness.push(Word(path));
                }
            }
        }
        witness.sort();
        Irreducibility::Irreducible { witness }
    }

    fn irreducibility_explicit(&self) -> Irreducibility {
        let ne = self.edges.len();
        let mut witness = Vec::new();
        let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
        for i in 0..ne {
            // BFS over edges reachable after i; back[j] = previous edge
            let mut back: Vec<Option<usize>> = vec![None; ne];
            let mut reached = vec![false; ne];
            let mut q = VecDeque::new();
            for &j in &self.succ[i] {
                if !reached[j] {
                    reached[j] = true;
                    q.push_back(j);
                }
            }
            while let Some(x) = q.pop_front() {
                for &y in &self.succ[x] {
                    if !reached[y] {
                        reached[y] = true;
                        back[y] = Some(x);
                        q.push_back(y);
                    }
                }
            }
            for j in 0..ne {
                if !reached[j] {
                    return Irreducibility::Reducible { from: i, to: j };
                }
                let mut mid = Vec::new();
                let mut y = j;
                while let Some(x) = back[y] {
                    mid.push(x);
                    y = x;
                }
                mid.reverse();
                if seen.insert(mid.clone(), ()).is_none() {
                    witness.push(Word(mid));
                }
            }
        }
        witness.sort();
        Irreducibility::Irreducible { witness }
    }

    /// The maximal system whose vertices are the edges of `self`: vertex
    /// `e` holds a ball enclosing `phi_e(X_{to(e)})`, and each admissible
    /// pair `a b` becomes an edge from `a` to `b` carrying `phi_a`.
    pub fn maximalize(&self) -> Result<Gdms> {
        let mut vertices = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let (c, r) = e.map.image_ball(&self.vertices[e.to].region)?;
            vertices.push(Vertex {
                id: e.id.clone(),
                region: Region::ball(c, r.max(f64::MIN_POSITIVE)),
            });
        }
        let mut edges = Vec::new();
        for (a, ea) in self.edges.iter().enumerate() {
            for &b in self.successors(a) {
                edges.push(Edge {
                    id: format!("{}.{}", ea.id, self.edges[b].id),
                    from: a,
                    to: b,
                    map: ea.map.clone(),
                });
            }
        }
        let mut sys = Self::assemble(self.group.clone(), vertices, edges, Incidence::Maximal, self.s)?;
        sys.truncation = self.truncation;
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Irreducibility {
    /// For all edges `i`, `j` some `w` in `witness` makes `i w j` admissible.
    Irreducible { witness: Vec<Word> },
    /// No admissible word leads from edge `from` to edge `to`.
    Reducible { from: usize, to: usize },
}

impl Irreducibility {
    pub fn is_irreducible(&self) -> bool {
        matches!(self, Irreducibility::Irreducible { .. })
    }
}

#[cfg(test)]
pub(crate) mod test_systems {
    use super::*;
    use crate::conformal::Primitive;
    use crate::group::GPoint;

    pub fn h1() -> Arc<GroupSpec> {
        Arc::new(GroupSpec::heisenberg(1).unwrap())
    }

    /// `x -> b * delta_r(x)` on `Heis^1`.
    pub fn sim(g: &Arc<GroupSpec>, r: f64, b: [f64; 3]) -> ConformalChain {
        ConformalChain::new(
            g.clone(),
            vec![
                Primitive::Dilate(r),
                Primitive::Translate(GPoint::new(&b[..2], &b[2..])),
            ],
        )
        .unwrap()
    }

    pub fn one_vertex(g: &Arc<GroupSpec>, radius: f64) -> Vec<Vertex> {
        vec![Vertex {
            id: "X".into(),
            region: Region::ball(GPoint::origin(g), radius),
        }]
    }

    pub fn ifs(maps: Vec<ConformalChain>, radius: f64, incidence: Incidence) -> Gdms {
        let g = maps[0].group().clone();
        let edges = maps
            .into_iter()
            .enumerate()
            .map(|(i, m)| Edge {
                id: format!("{}", i + 1),
                from: 0,
                to: 0,
                map: m,
            })
            .collect();
        Gdms::new(g.clone(), one_vertex(&g, radius), edges, incidence, None, &ValidationConfig::default())
            .unwrap()
    }

    /// Two maps with ratios 1/2 and 1/3 and the golden-mean incidence.
    pub fn golden(ratio_b: f64) -> Gdms {
        let g = h1();
        let a = sim(&g, 0.5, [0.5, 0.0, 0.0]);
        let b = sim(&g, ratio_b, [-0.6, 0.0, 0.0]);
        ifs(
            vec![a, b],
            1.5,
            Incidence::Explicit(vec![vec![true, true], vec![true, false]]),
        )
    }
}
