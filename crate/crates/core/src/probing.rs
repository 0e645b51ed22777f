//! Probing one online vertex from its LP-new columns.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::formulations::{check_tuple, ContributionVector, TupleColumn};
use crate::graph::{edge_uniform, EdgeStateSample, StochasticGraph};

/// Slack allowed on the column mass `Σ x_v(u) ≤ 1`.
pub const MASS_TOL: f64 = 1e-7;

/// Supplies edge states to a prober. Every query of the same edge within one
/// run must return the same answer.
pub trait EdgeStateSource {
    fn state(&mut self, u: usize, v: usize) -> bool;
}

impl EdgeStateSource for EdgeStateSample {
    fn state(&mut self, u: usize, v: usize) -> bool {
        self.is_active(u, v)
    }
}

impl<S: EdgeStateSource + ?Sized> EdgeStateSource for &mut S {
    fn state(&mut self, u: usize, v: usize) -> bool {
        (**self).state(u, v)
    }
}

/// States drawn on first query from a counter-based stream keyed by
/// `(seed, u, v)` and memoized.
#[derive(Clone, Debug)]
pub struct LazyStates<'a> {
    graph: &'a StochasticGraph,
    seed: u64,
    drawn: HashMap<(usize, usize), bool>,
}

impl<'a> LazyStates<'a> {
    pub fn new(graph: &'a StochasticGraph, seed: u64) -> Self {
        LazyStates {
            graph,
            seed,
            drawn: HashMap::new(),
        }
    }

    /// Edges revealed so far.
    pub fn revealed(&self) -> &HashMap<(usize, usize), bool> {
        &self.drawn
    }
}

impl EdgeStateSource for LazyStates<'_> {
    fn state(&mut self, u: usize, v: usize) -> bool {
        let (graph, seed) = (self.graph, self.seed);
        *self
            .drawn
            .entry((u, v))
            .or_insert_with(|| edge_uniform(seed, u, v) < graph.p(u, v))
    }
}

/// What happened while one online vertex was processed.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTranscript {
    pub online_vertex: usize,
    /// `None` when the vertex passed.
    pub chosen_tuple: Option<Vec<usize>>,
    /// Truly probed offline vertices with the revealed states, in order.
    pub probes: Vec<(usize, bool)>,
    /// Offline vertices whose probe was replaced by an independent draw.
    pub simulated: Vec<(usize, bool)>,
    pub committed: Option<usize>,
    pub committed_was_probed: bool,
}

impl ProbeTranscript {
    fn pass(v: usize) -> Self {
        ProbeTranscript {
            online_vertex: v,
            chosen_tuple: None,
            probes: Vec::new(),
            simulated: Vec::new(),
            committed: None,
            committed_was_probed: false,
        }
    }
}

/// The columns of one online vertex prepared for repeated sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexPlan {
    pub online_vertex: usize,
    tuples: Vec<Vec<usize>>,
    cumulative: Vec<f64>,
}

impl VertexPlan {
    /// Validates `columns` (all for `v`, within patience, total mass at most
    /// `1 + MASS_TOL`) and keeps those with positive value in given order.
    pub fn new(graph: &StochasticGraph, v: usize, columns: &[TupleColumn]) -> Result<Self> {
        Self::scaled(graph, v, columns, 1.0)
    }

    /// As [`VertexPlan::new`] with every value divided by `scale`.
    pub fn scaled(
        graph: &StochasticGraph,
        v: usize,
        columns: &[TupleColumn],
        scale: f64,
    ) -> Result<Self> {
        let mut tuples = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for col in columns {
            if col.online_vertex != v {
                return Err(Error::InvalidParameter(format!(
                    "column of v{} passed for v{v}",
                    col.online_vertex
                )));
            }
            check_tuple(graph, v, &col.tuple)?;
            let x = col.value / scale;
            if !(x >= 0.0) {
                return Err(Error::Infeasible(format!("column value {x}")));
            }
            if x > 0.0 {
                acc += x;
                tuples.push(col.tuple.clone());
                cumulative.push(acc);
            }
        }
        if acc > 1.0 + MASS_TOL {
            return Err(Error::Infeasible(format!(
                "column mass {acc} of v{v} exceeds 1"
            )));
        }
        Ok(VertexPlan {
            online_vertex: v,
            tuples,
            cumulative,
        })
    }

    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// One uniform draw against the cumulative masses.
    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&[usize]> {
        let x: f64 = rng.gen();
        self.cumulative
            .iter()
            .position(|&c| x < c)
            .map(|i| self.tuples[i].as_slice())
    }

    /// Runs VertexProbe.
    pub fn probe<R: Rng + ?Sized>(
        &self,
        states: &mut dyn EdgeStateSource,
        rng: &mut R,
    ) -> ProbeTranscript {
        let v = self.online_vertex;
        let mut t = ProbeTranscript::pass(v);
        let Some(tuple) = self.select(rng) else {
            return t;
        };
        t.chosen_tuple = Some(tuple.to_vec());
        for &u in tuple {
            let active = states.state(u, v);
            t.probes.push((u, active));
            if active {
                t.committed = Some(u);
                t.committed_was_probed = true;
                break;
            }
        }
        t
    }

    /// Runs VertexProbe-S: entry `u` is truly probed only when
    /// `w_{u,v} ≥ (1 − e^{z−1}) · c_u`; otherwise an independent
    /// Bernoulli(`p_{u,v}`) draw from `rng` stands in for its state.
    pub fn probe_s<R: Rng + ?Sized>(
        &self,
        graph: &StochasticGraph,
        z: f64,
        contributions: &ContributionVector,
        states: &mut dyn EdgeStateSource,
        rng: &mut R,
    ) -> ProbeTranscript {
        let v = self.online_vertex;
        let mut t = ProbeTranscript::pass(v);
        let Some(tuple) = self.select(rng) else {
            return t;
        };
        t.chosen_tuple = Some(tuple.to_vec());
        let factor = 1.0 - (z - 1.0).exp();
        for &u in tuple {
            let real = graph.w(u, v) >= factor * contributions.values[u];
            let active = if real {
                let s = states.state(u, v);
                t.probes.push((u, s));
                s
            } else {
                let s = rng.gen::<f64>() < graph.p(u, v);
                t.simulated.push((u, s));
                s
            };
            if active {
                t.committed = Some(u);
                t.committed_was_probed = real;
                break;
            }
        }
        t
    }
}

/// Algorithm VertexProbe on online vertex `v`.
pub fn vertex_probe<R: Rng + ?Sized>(
    graph: &StochasticGraph,
    v: usize,
    columns: &[TupleColumn],
    states: &mut dyn EdgeStateSource,
    rng: &mut R,
) -> Result<ProbeTranscript> {
    Ok(VertexPlan::new(graph, v, columns)?.probe(states, rng))
}

/// Algorithm VertexProbe-S on online vertex `v` with arrival time `z`.
pub fn vertex_probe_s<R: Rng + ?Sized>(
    graph: &StochasticGraph,
    v: usize,
    columns: &[TupleColumn],
    z: f64,
    contributions: &ContributionVector,
    states: &mut dyn EdgeStateSource,
    rng: &mut R,
) -> Result<ProbeTranscript> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidParameter(format!(
            "z must lie in [0, 1], got {z}"
        )));
    }
    if contributions.values.len() != graph.offline_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} contributions for {} offline vertices",
            contributions.values.len(),
            graph.offline_count()
        )));
    }
    Ok(VertexPlan::new(graph, v, columns)?.probe_s(graph, z, contributions, states, rng))
}
