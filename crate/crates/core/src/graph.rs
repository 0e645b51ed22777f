//! Stochastic bipartite graphs, known-i.i.d. type graphs, edge-state
//! sampling and the fixtures used throughout the crate.
//!
//! Every pair `(u, v)` of offline/online vertices carries a probability and a
//! weight; a missing edge is simply `p = 0`. Matrices are stored row-major by
//! offline vertex.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix, unit_f64};

/// How edge weights are constrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    EdgeWeighted,
    OfflineVertexWeighted,
    Unweighted,
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightMode::EdgeWeighted => "edge_weighted",
            WeightMode::OfflineVertexWeighted => "offline_vertex_weighted",
            WeightMode::Unweighted => "unweighted",
        })
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_weighted" => Ok(WeightMode::EdgeWeighted),
            "offline_vertex_weighted" => Ok(WeightMode::OfflineVertexWeighted),
            "unweighted" => Ok(WeightMode::Unweighted),
            other => Err(Error::Parse(format!("unknown weight_mode `{other}`"))),
        }
    }
}

/// A bipartite stochastic graph `G = (U, V, U x V)`.
///
/// `U` is the offline side (known up front) and `V` the online side. Each
/// online vertex `v` may probe at most `patience[v]` of its edges.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticGraph {
    offline: usize,
    online: usize,
    prob: Vec<f64>,
    weight: Vec<f64>,
    patience: Vec<usize>,
    weight_mode: WeightMode,
}

impl StochasticGraph {
    /// Builds and validates a graph from row-major `offline x online` matrices.
    pub fn new(
        offline: usize,
        online: usize,
        prob: Vec<f64>,
        weight: Vec<f64>,
        patience: Vec<usize>,
        weight_mode: WeightMode,
    ) -> Result<Self> {
        let expected = offline * online;
        if prob.len() != expected || weight.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} edge entries, got p={} w={}",
                prob.len(),
                weight.len()
            )));
        }
        if patience.len() != online {
            return Err(Error::DimensionMismatch(format!(
                "expected {online} patience values, got {}",
                patience.len()
            )));
        }
        let g = StochasticGraph {
            offline,
            online,
            prob,
            weight,
            patience,
            weight_mode,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds from nested `[u][v]` matrices.
    pub fn from_matrices(
        prob: &[Vec<f64>],
        weight: &[Vec<f64>],
        patience: Vec<usize>,
        weight_mode: WeightMode,
    ) -> Result<Self> {
        let offline = prob.len();
        let online = patience.len();
        if weight.len() != offline {
            return Err(Error::DimensionMismatch(
                "probability and weight matrices differ in rows".into(),
            ));
        }
        let mut p = Vec::with_capacity(offline * online);
        let mut w = Vec::with_capacity(offline * online);
        for (prow, wrow) in prob.iter().zip(weight) {
            if prow.len() != online || wrow.len() != online {
                return Err(Error::DimensionMismatch(format!(
                    "every row must have {online} columns"
                )));
            }
            p.extend_from_slice(prow);
            w.extend_from_slice(wrow);
        }
        Self::new(offline, online, p, w, patience, weight_mode)
    }

    /// An unweighted graph with every weight equal to one.
    pub fn unweighted(prob: &[Vec<f64>], patience: Vec<usize>) -> Result<Self> {
        let weight: Vec<Vec<f64>> = prob.iter().map(|r| vec![1.0; r.len()]).collect();
        Self::from_matrices(prob, &weight, patience, WeightMode::Unweighted)
    }

    /// An offline-vertex-weighted graph: `w[u][v] = vertex_weight[u]`.
    pub fn vertex_weighted(
        prob: &[Vec<f64>],
        vertex_weight: &[f64],
        patience: Vec<usize>,
    ) -> Result<Self> {
        let weight: Vec<Vec<f64>> = prob
            .iter()
            .zip(vertex_weight)
            .map(|(r, &w)| vec![w; r.len()])
            .collect();
        Self::from_matrices(prob, &weight, patience, WeightMode::OfflineVertexWeighted)
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        for u in 0..self.offline {
            for v in 0..self.online {
                let p = self.p(u, v);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange { u, v, p });
                }
                let w = self.w(u, v);
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidWeight { u, v, w });
                }
            }
        }
        for (v, &l) in self.patience.iter().enumerate() {
            if l > self.offline {
                return Err(Error::PatienceOutOfRange {
                    v,
                    patience: l,
                    offline: self.offline,
                });
            }
        }
        match self.weight_mode {
            WeightMode::EdgeWeighted => {}
            WeightMode::OfflineVertexWeighted => {
                for u in 0..self.offline {
                    for v in 1..self.online {
                        if self.w(u, v) != self.w(u, 0) {
                            return Err(Error::WeightModeInconsistent(format!(
                                "offline vertex {u} has weights {} and {}",
                                self.w(u, 0),
                                self.w(u, v)
                            )));
                        }
                    }
                }
            }
            WeightMode::Unweighted => {
                if let Some(i) = self.weight.iter().position(|&w| w != 1.0) {
                    return Err(Error::WeightModeInconsistent(format!(
                        "unweighted graph has weight {} on edge ({}, {})",
                        self.weight[i],
                        i / self.online.max(1),
                        i % self.online.max(1)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn offline_count(&self) -> usize {
        self.offline
    }

    pub fn online_count(&self) -> usize {
        self.online
    }

    #[inline]
    pub fn p(&self, u: usize, v: usize) -> f64 {
        self.prob[u * self.online + v]
    }

    #[inline]
    pub fn w(&self, u: usize, v: usize) -> f64 {
        self.weight[u * self.online + v]
    }

    #[inline]
    pub fn patience(&self, v: usize) -> usize {
        self.patience[v]
    }

    pub fn patience_values(&self) -> &[usize] {
        &self.patience
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    /// Column `v` of the probability matrix.
    pub fn probs_of(&self, v: usize) -> Vec<f64> {
        (0..self.offline).map(|u| self.p(u, v)).collect()
    }

    /// Column `v` of the weight matrix.
    pub fn weights_of(&self, v: usize) -> Vec<f64> {
        (0..self.offline).map(|u| self.w(u, v)).collect()
    }

    /// Number of pairs with a non-zero probability.
    pub fn edge_count(&self) -> usize {
        self.prob.iter().filter(|&&p| p > 0.0).count()
    }

    /// True when every online vertex has patience at most one.
    pub fn has_unit_patience(&self) -> bool {
        self.patience.iter().all(|&l| l <= 1)
    }

    /// The graph induced on the online vertices `subset`, in the given order.
    pub fn induced_subgraph(&self, subset: &[usize]) -> Result<StochasticGraph> {
        if let Some(&bad) = subset.iter().find(|&&v| v >= self.online) {
            return Err(Error::IndexOutOfRange(format!(
                "online index {bad} (graph has {} online vertices)",
                self.online
            )));
        }
        let k = subset.len();
        let mut prob = Vec::with_capacity(self.offline * k);
        let mut weight = Vec::with_capacity(self.offline * k);
        for u in 0..self.offline {
            for &v in subset {
                prob.push(self.p(u, v));
                weight.push(self.w(u, v));
            }
        }
        Ok(StochasticGraph {
            offline: self.offline,
            online: k,
            prob,
            weight,
            patience: subset.iter().map(|&v| self.patience[v]).collect(),
            weight_mode: self.weight_mode,
        })
    }

    /// Draws every edge state independently. Each state is a pure function
    /// of `(seed, u, v)`.
    pub fn sample_states(&self, seed: u64) -> EdgeStateSample {
        let mut state = Vec::with_capacity(self.offline * self.online);
        for u in 0..self.offline {
            for v in 0..self.online {
                state.push(edge_uniform(seed, u, v) < self.p(u, v));
            }
        }
        EdgeStateSample {
            offline: self.offline,
            online: self.online,
            state,
        }
    }
}

/// The uniform variate deciding the state of edge `(u, v)` under `seed`.
#[inline]
pub fn edge_uniform(seed: u64, u: usize, v: usize) -> f64 {
    unit_f64(mix(mix(mix(seed, 0x5354_4154_4553), u as u64), v as u64))
}

/// A full realization of edge states for one graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeStateSample {
    offline: usize,
    online: usize,
    state: Vec<bool>,
}

impl EdgeStateSample {
    pub fn from_matrix(states: &[Vec<bool>]) -> Self {
        let offline = states.len();
        let online = states.first().map_or(0, Vec::len);
        EdgeStateSample {
            offline,
            online,
            state: states.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn is_active(&self, u: usize, v: usize) -> bool {
        self.state[u * self.online + v]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.offline, self.online)
    }
}

/// A known-i.i.d. input `(G, r, n)`: a type graph, per-type arrival rates
/// summing to the horizon, and the horizon itself.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeGraphInstance {
    type_graph: StochasticGraph,
    rates: Vec<f64>,
    horizon: usize,
}

/// Largest deviation of `sum(rates)` from the horizon that is renormalized
/// silently.
pub const RATE_SUM_TOLERANCE: f64 = 1e-9;

impl TypeGraphInstance {
    pub fn new(type_graph: StochasticGraph, rates: Vec<f64>, horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if rates.len() != type_graph.online_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} rates for {} types",
                rates.len(),
                type_graph.online_count()
            )));
        }
        if let Some(&r) = rates.iter().find(|&&r| !(r.is_finite() && r > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "arrival rates must be positive, got {r}"
            )));
        }
        let sum: f64 = rates.iter().sum();
        let n = horizon as f64;
        if (sum - n).abs() > RATE_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "arrival rates sum to {sum}, expected horizon {horizon}"
            )));
        }
        let rates = if sum != n {
            rates.iter().map(|r| r * n / sum).collect()
        } else {
            rates
        };
        Ok(TypeGraphInstance {
            type_graph,
            rates,
            horizon,
        })
    }

    pub fn type_graph(&self) -> &StochasticGraph {
        &self.type_graph
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, v: usize) -> f64 {
        self.rates[v]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The type drawn in round `t` (0-based) under `seed`.
    pub fn draw_type(&self, seed: u64, t: usize) -> usize {
        let x = unit_f64(mix(mix(seed, 0x4152_5249_5645), t as u64)) * self.horizon as f64;
        let mut acc = 0.0;
        for (v, &r) in self.rates.iter().enumerate() {
            acc += r;
            if x < acc {
                return v;
            }
        }
        self.rates.len() - 1
    }

    /// Draws the `n` arrivals i.i.d. with `P[type v] = r_v / n`.
    pub fn instantiate(&self, seed: u64) -> InstantiatedGraph {
        let arrivals = (0..self.horizon).map(|t| self.draw_type(seed, t)).collect();
        InstantiatedGraph { arrivals }
    }
}

/// The arrival sequence of one instantiation `Ĝ ~ (G, r, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiatedGraph {
    pub arrivals: Vec<usize>,
}

impl InstantiatedGraph {
    /// The stochastic graph seen by the offline benchmarks: one online column
    /// per arrival, duplicated from its type.
    pub fn graph(&self, instance: &TypeGraphInstance) -> Result<StochasticGraph> {
        instance.type_graph().induced_subgraph(&self.arrivals)
    }
}

/// Named instances taken from the worked examples of the literature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fixture {
    /// `G_{n,n,1/n}` with full patience.
    StochasticityGap(usize),
    /// Two offline, two online, unit patience; order gap 0.8.
    OrderGap,
    /// One offline vertex and two online vertices with weights `1/eps` and
    /// `eps/(1-eps)`.
    HalfRom(f64),
    /// One offline vertex, `n` unit-patience online vertices with `p = 1/n`.
    SingleOffline(usize),
    /// One online vertex of patience 2 against three offline vertices.
    NoncommittalGap,
}

impl Fixture {
    /// Parses `name` with an optional numeric parameter.
    pub fn parse(name: &str, param: Option<f64>) -> Result<Fixture> {
        let need_n = |param: Option<f64>| -> Result<usize> {
            let n = param.ok_or_else(|| {
                Error::InvalidParameter(format!("fixture `{name}` needs a parameter n"))
            })?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "n must be a positive integer, got {n}"
                )));
            }
            Ok(n as usize)
        };
        let key = name.replace('-', "_");
        match key.as_str() {
            "stochasticity_gap" | "gnnp" => Ok(Fixture::StochasticityGap(need_n(param)?)),
            "order_gap" => Ok(Fixture::OrderGap),
            "half_rom" => {
                let eps = param.ok_or_else(|| {
                    Error::InvalidParameter("half_rom needs a parameter eps".into())
                })?;
                Ok(Fixture::HalfRom(eps))
            }
            "single_offline" => Ok(Fixture::SingleOffline(need_n(param)?)),
            "noncommittal_gap" => Ok(Fixture::NoncommittalGap),
            _ => Err(Error::UnknownFixture(name.to_string())),
        }
    }

    pub fn build(&self) -> Result<StochasticGraph> {
        match *self {
            Fixture::StochasticityGap(n) => {
                if n < 1 {
                    return Err(Error::InvalidParameter("n must be at least 1".into()));
                }
                let p = 1.0 / n as f64;
                StochasticGraph::unweighted(&vec![vec![p; n]; n], vec![n; n])
            }
            Fixture::OrderGap => {
                StochasticGraph::unweighted(&[vec![0.5, 0.0], vec![1.0, 0.5]], vec![1, 1])
            }
            Fixture::HalfRom(eps) => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "eps must lie in (0, 1), got {eps}"
                    )));
                }
                StochasticGraph::from_matrices(
                    &[vec![eps, 1.0 - eps]],
                    &[vec![1.0 / eps, eps / (1.0 - eps)]],
                    vec![1, 1],
                    WeightMode::EdgeWeighted,
                )
            }
            Fixture::SingleOffline(n) => {
                if n < 1 {
                    return Err(Error::InvalidParameter("n must be at least 1".into()));
                }
                StochasticGraph::unweighted(&[vec![1.0 / n as f64; n]], vec![1; n])
            }
            Fixture::NoncommittalGap => StochasticGraph::from_matrices(
                &[vec![0.8], vec![0.6], vec![0.01]],
                &[vec![3.0], vec![4.0], vec![98.0]],
                vec![2],
                WeightMode::EdgeWeighted,
            ),
        }
    }
}

/// Shorthand for `Fixture::parse(name, param)?.build()`.
pub fn paper_example(name: &str, param: Option<f64>) -> Result<StochasticGraph> {
    Fixture::parse(name, param)?.build()
}

/// Parameters for [`random_graph`].
#[derive(Clone, Debug)]
pub struct RandomGraphConfig {
    pub offline: usize,
    pub online: usize,
    pub max_patience: usize,
    /// Probability that a pair carries an edge at all.
    pub density: f64,
    pub weight_mode: WeightMode,
    pub max_weight: f64,
}

impl Default for RandomGraphConfig {
    fn default() -> Self {
        RandomGraphConfig {
            offline: 3,
            online: 3,
            max_patience: 2,
            density: 0.8,
            weight_mode: WeightMode::EdgeWeighted,
            max_weight: 5.0,
        }
    }
}

/// A seeded random instance. Probabilities are uniform in `(0.05, 1)`,
/// weights uniform in `(0.1, max_weight)`, patience uniform in
/// `1..=min(max_patience, offline)`.
pub fn random_graph(cfg: &RandomGraphConfig, seed: u64) -> StochasticGraph {
    use rand::Rng;
    let mut rng = crate::rng::seeded(seed);
    let (m, n) = (cfg.offline, cfg.online);
    let mut prob = vec![0.0; m * n];
    let mut weight = vec![0.0; m * n];
    let vertex_w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..cfg.max_weight)).collect();
    for u in 0..m {
        for v in 0..n {
            let i = u * n + v;
            if rng.gen::<f64>() < cfg.density {
                prob[i] = rng.gen_range(0.05..1.0);
            }
            weight[i] = match cfg.weight_mode {
                WeightMode::EdgeWeighted => rng.gen_range(0.1..cfg.max_weight),
                WeightMode::OfflineVertexWeighted => vertex_w[u],
                WeightMode::Unweighted => 1.0,
            };
        }
    }
    let top = cfg.max_patience.min(m).max(1);
    let patience = (0..n)
        .map(|_| if m == 0 { 0 } else { rng.gen_range(1..=top) })
        .collect();
    StochasticGraph::new(m, n, prob, weight, patience, cfg.weight_mode)
        .expect("random graph respects every invariant")
}

/// A seeded random type graph with rates summing to `horizon`.
pub fn random_type_graph(cfg: &RandomGraphConfig, horizon: usize, seed: u64) -> TypeGraphInstance {
    use rand::Rng;
    let graph = random_graph(cfg, seed);
    let mut rng = crate::rng::seeded(mix(seed, 0x7261_7465));
    let raw: Vec<f64> = (0..cfg.online).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut rates: Vec<f64> = raw.iter().map(|r| r * horizon as f64 / total).collect();
    // Absorb rounding into the last rate so the sum is exact.
    let head: f64 = rates[..rates.len() - 1].iter().sum();
    let last = rates.len() - 1;
    rates[last] = horizon as f64 - head;
    TypeGraphInstance::new(graph, rates, horizon).expect("rates are positive and sum to horizon")
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: usize,
    v: usize,
    p: f64,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    offline: usize,
    online: usize,
    patience: Vec<usize>,
    weight_mode: WeightMode,
    edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

impl GraphJson {
    fn from_graph(g: &StochasticGraph) -> Self {
        let mut edges = Vec::new();
        for u in 0..g.offline {
            for v in 0..g.online {
                let (p, w) = (g.p(u, v), g.w(u, v));
                let implied = match g.weight_mode {
                    WeightMode::Unweighted => true,
                    _ => w == 0.0,
                };
                if p > 0.0 || !implied {
                    edges.push(EdgeJson { u, v, p, w });
                }
            }
        }
        GraphJson {
            offline: g.offline,
            online: g.online,
            patience: g.patience.clone(),
            weight_mode: g.weight_mode,
            edges,
            rates: None,
            horizon: None,
        }
    }

    fn into_graph(self) -> Result<StochasticGraph> {
        let (m, n) = (self.offline, self.online);
        let mut prob = vec![0.0; m * n];
        let mut weight = vec![f64::NAN; m * n];
        for e in &self.edges {
            if e.u >= m || e.v >= n {
                return Err(Error::IndexOutOfRange(format!("edge ({}, {})", e.u, e.v)));
            }
            prob[e.u * n + e.v] = e.p;
            weight[e.u * n + e.v] = e.w;
        }
        for u in 0..m {
            let fill = match self.weight_mode {
                WeightMode::Unweighted => 1.0,
                WeightMode::EdgeWeighted => 0.0,
                WeightMode::OfflineVertexWeighted => weight[u * n..(u + 1) * n]
                    .iter()
                    .copied()
                    .find(|w| !w.is_nan())
                    .unwrap_or(0.0),
            };
            for w in &mut weight[u * n..(u + 1) * n] {
                if w.is_nan() {
                    *w = fill;
                }
            }
        }
        StochasticGraph::new(m, n, prob, weight, self.patience, self.weight_mode)
    }
}

impl StochasticGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from_graph(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_graph()
    }
}

impl TypeGraphInstance {
    pub fn to_json(&self) -> String {
        let mut raw = GraphJson::from_graph(&self.type_graph);
        raw.rates = Some(self.rates.clone());
        raw.horizon = Some(self.horizon);
        serde_json::to_string_pretty(&raw).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut raw: GraphJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let rates = raw
            .rates
            .take()
            .ok_or_else(|| Error::Parse("type graph needs `rates`".into()))?;
        let horizon = raw
            .horizon
            .take()
            .ok_or_else(|| Error::Parse("type graph needs `horizon`".into()))?;
        TypeGraphInstance::new(raw.into_graph()?, rates, horizon)
    }
}

/// Either kind of input file.
#[derive(Clone, Debug)]
pub enum Instance {
    Graph(StochasticGraph),
    Iid(TypeGraphInstance),
}

impl Instance {
    /// Parses a graph file, treating it as a type graph when it carries rates.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if value.get("rates").is_some() {
            TypeGraphInstance::from_json(text).map(Instance::Iid)
        } else {
            StochasticGraph::from_json(text).map(Instance::Graph)
        }
    }
}
