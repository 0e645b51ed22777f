//! Exact offline and online benchmarks for tiny instances.
//!
//! The state spaces are exponential, so every entry point checks its input
//! against a [`BenchmarkLimits`] first.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{StochasticGraph, TypeGraphInstance};
use crate::pricing::star_sequence_dp;
use crate::simulate::{estimate_value, SimConfig, SimReport};

/// Hard cap on memoized states.
pub const MEMO_CAP: usize = 1 << 26;

/// Largest online side accepted by [`order_gap`].
pub const ORDER_GAP_MAX_ONLINE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchmarkLimits {
    pub max_offline: usize,
    pub max_online: usize,
    /// Counts pairs with positive probability.
    pub max_edges: usize,
    pub max_patience: usize,
}

impl Default for BenchmarkLimits {
    fn default() -> Self {
        BenchmarkLimits {
            max_offline: 4,
            max_online: 3,
            max_edges: 9,
            max_patience: 3,
        }
    }
}

impl BenchmarkLimits {
    /// Limits wide enough for every instance used in the examples.
    pub fn wide() -> Self {
        BenchmarkLimits {
            max_offline: 8,
            max_online: 8,
            max_edges: 16,
            max_patience: 8,
        }
    }

    pub fn check(&self, graph: &StochasticGraph) -> Result<()> {
        let checks = [
            ("offline vertices", graph.offline_count(), self.max_offline),
            ("online vertices", graph.online_count(), self.max_online),
            ("edges", graph.edge_count(), self.max_edges),
            (
                "patience",
                graph.patience_values().iter().copied().max().unwrap_or(0),
                self.max_patience,
            ),
        ];
        for (what, got, max) in checks {
            if got > max {
                return Err(Error::LimitExceeded(format!("{got} {what} > limit {max}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Edge {
    u: usize,
    v: usize,
    p: f64,
    w: f64,
}

fn edges_of(graph: &StochasticGraph) -> Vec<Edge> {
    let mut edges = Vec::new();
    for v in 0..graph.online_count() {
        for u in 0..graph.offline_count() {
            let p = graph.p(u, v);
            if p > 0.0 {
                edges.push(Edge {
                    u,
                    v,
                    p,
                    w: graph.w(u, v),
                });
            }
        }
    }
    edges
}

struct Committal<'a> {
    graph: &'a StochasticGraph,
    edges: Vec<Edge>,
    memo: HashMap<u64, f64>,
}

impl Committal<'_> {
    /// Canonical key: matched offline mask, matched online mask, remaining
    /// patience of each unmatched online vertex, and the failed-probe bits of
    /// edges whose endpoints are both unmatched.
    fn key(&self, mu: u32, mv: u32, failed: u32, left: &[usize]) -> u64 {
        let (m, n) = (self.graph.offline_count(), self.graph.online_count());
        let mut live = 0u32;
        for (i, e) in self.edges.iter().enumerate() {
            if mu >> e.u & 1 == 0 && mv >> e.v & 1 == 0 {
                live |= failed & (1 << i);
            }
        }
        let mut key = mu as u64 | (mv as u64) << m;
        let mut shift = m + n;
        for (v, &l) in left.iter().enumerate() {
            let l = if mv >> v & 1 == 1 { 0 } else { l };
            key |= (l as u64) << shift;
            shift += 4;
        }
        key | (live as u64) << shift
    }

    fn value(&mut self, mu: u32, mv: u32, failed: u32, left: &mut [usize]) -> Result<f64> {
        let key = self.key(mu, mv, failed, left);
        if let Some(&x) = self.memo.get(&key) {
            return Ok(x);
        }
        let mut best = 0.0f64;
        for i in 0..self.edges.len() {
            let e = self.edges[i];
            if mu >> e.u & 1 == 1 || mv >> e.v & 1 == 1 || failed >> i & 1 == 1 || left[e.v] == 0 {
                continue;
            }
            left[e.v] -= 1;
            let matched = self.value(mu | 1 << e.u, mv | 1 << e.v, failed, left)?;
            let missed = self.value(mu, mv, failed | 1 << i, left)?;
            left[e.v] += 1;
            best = best.max(e.p * (e.w + matched) + (1.0 - e.p) * missed);
        }
        if self.memo.len() >= MEMO_CAP {
            return Err(Error::CapExceeded(format!(
                "more than {MEMO_CAP} memoized states"
            )));
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

/// Committal benchmark `OPT(G)`: the best adaptive policy that probes edges
/// in any order, respects patience, and must match every probed active edge.
pub fn opt_committal_exact(graph: &StochasticGraph, limits: &BenchmarkLimits) -> Result<f64> {
    limits.check(graph)?;
    let n = graph.online_count();
    if graph.offline_count() + 5 * n + graph.edge_count() > 64 || graph.edge_count() > 32 {
        return Err(Error::LimitExceeded(
            "state does not fit a 64-bit key".into(),
        ));
    }
    let mut dp = Committal {
        graph,
        edges: edges_of(graph),
        memo: HashMap::new(),
    };
    let mut left: Vec<usize> = graph.patience_values().to_vec();
    dp.value(0, 0, 0, &mut left)
}

/// Maximum-weight matching over `edges` restricted to the bits of `active`.
fn max_weight_matching(edges: &[Edge], active: u32, online: usize) -> f64 {
    fn go(edges: &[Edge], active: u32, online: usize, v: usize, used: u32) -> f64 {
        if v == online {
            return 0.0;
        }
        let mut best = go(edges, active, online, v + 1, used);
        for (i, e) in edges.iter().enumerate() {
            if e.v == v && active >> i & 1 == 1 && used >> e.u & 1 == 0 {
                best = best.max(e.w + go(edges, active, online, v + 1, used | 1 << e.u));
            }
        }
        best
    }
    go(edges, active, online, 0, 0)
}

/// Non-committal benchmark `OPT_non(G)`: the best adaptive policy that
/// respects patience, then keeps a maximum-weight matching of the active
/// edges it revealed.
pub fn opt_noncommittal_exact(graph: &StochasticGraph, limits: &BenchmarkLimits) -> Result<f64> {
    limits.check(graph)?;
    let edges = edges_of(graph);
    let count = edges.len();
    let states = 3usize
        .checked_pow(count as u32)
        .filter(|&s| s <= MEMO_CAP)
        .ok_or_else(|| Error::CapExceeded(format!("3^{count} edge states exceed {MEMO_CAP}")))?;
    let mut pow3 = vec![1usize; count + 1];
    for i in 0..count {
        pow3[i + 1] = pow3[i] * 3;
    }
    let mut memo = vec![f64::NAN; states];
    let patience = graph.patience_values().to_vec();

    // Status digit per edge: 0 unprobed, 1 active, 2 inactive.
    fn go(
        edges: &[Edge],
        pow3: &[usize],
        patience: &[usize],
        online: usize,
        memo: &mut [f64],
        index: usize,
        active: u32,
        used: &mut [usize],
    ) -> f64 {
        if !memo[index].is_nan() {
            return memo[index];
        }
        let mut best = max_weight_matching(edges, active, online);
        for (i, e) in edges.iter().enumerate() {
            if (index / pow3[i]) % 3 != 0 || used[e.v] >= patience[e.v] {
                continue;
            }
            used[e.v] += 1;
            let hit = go(
                edges,
                pow3,
                patience,
                online,
                memo,
                index + pow3[i],
                active | 1 << i,
                used,
            );
            let miss = go(
                edges,
                pow3,
                patience,
                online,
                memo,
                index + 2 * pow3[i],
                active,
                used,
            );
            used[e.v] -= 1;
            best = best.max(e.p * hit + (1.0 - e.p) * miss);
        }
        memo[index] = best;
        best
    }
    let mut used = vec![0; graph.online_count()];
    Ok(go(
        &edges,
        &pow3,
        &patience,
        graph.online_count(),
        &mut memo,
        0,
        0,
        &mut used,
    ))
}

/// Best expected value of an online committal algorithm that sees the
/// online vertices in `order`.
pub fn opt_online_fixed_order(
    graph: &StochasticGraph,
    order: &[usize],
    limits: &BenchmarkLimits,
) -> Result<f64> {
    limits.check(graph)?;
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut seen = vec![false; n];
    if order.len() != n
        || order
            .iter()
            .any(|&v| v >= n || std::mem::replace(&mut seen[v], true))
    {
        return Err(Error::InvalidParameter(
            "order must be a permutation of the online vertices".into(),
        ));
    }
    let full = 1usize << m;
    // next[a]: value from the next arrival onward with available set `a`.
    let mut next = vec![0.0; full];
    for &v in order.iter().rev() {
        let probs = graph.probs_of(v);
        let mut cur = vec![0.0; full];
        for a in 0..full {
            let weights: Vec<f64> = (0..m)
                .map(|u| {
                    if a >> u & 1 == 1 {
                        graph.w(u, v) + next[a & !(1 << u)] - next[a]
                    } else {
                        -1.0
                    }
                })
                .collect();
            cur[a] = next[a] + star_sequence_dp(&weights, &probs, graph.patience(v))?.0;
        }
        next = cur;
    }
    Ok(next[full - 1])
}

/// Values of the worst and best arrival orders and their ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderGap {
    pub worst: f64,
    pub worst_order: Vec<usize>,
    pub best: f64,
    pub best_order: Vec<usize>,
    /// `worst / best`, or 1 when every order is worth 0.
    pub ratio: f64,
}

/// Order gap of `graph`: worst over best fixed-order online optimum.
pub fn order_gap(graph: &StochasticGraph, limits: &BenchmarkLimits) -> Result<OrderGap> {
    let n = graph.online_count();
    if n > ORDER_GAP_MAX_ONLINE {
        return Err(Error::LimitExceeded(format!(
            "{n}! orders; at most {ORDER_GAP_MAX_ONLINE} online vertices"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let first = opt_online_fixed_order(graph, &order, limits)?;
    let mut gap = OrderGap {
        worst: first,
        worst_order: order.clone(),
        best: first,
        best_order: order.clone(),
        ratio: 1.0,
    };
    while next_permutation(&mut order) {
        let value = opt_online_fixed_order(graph, &order, limits)?;
        if value < gap.worst {
            gap.worst = value;
            gap.worst_order = order.clone();
        }
        if value > gap.best {
            gap.best = value;
            gap.best_order = order.clone();
        }
    }
    if gap.best > 0.0 {
        gap.ratio = gap.worst / gap.best;
    }
    Ok(gap)
}

/// Lexicographic successor; returns `false` after the last permutation.
pub fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let Some(i) = (0..a.len() - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..a.len())
        .rev()
        .find(|&j| a[j] > a[i])
        .expect("successor exists");
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}

/// `OPT(v, R)`: committal benchmark on the star of `v` restricted to `R`.
pub fn opt_star(graph: &StochasticGraph, v: usize, set: &[usize]) -> f64 {
    let weights: Vec<f64> = (0..graph.offline_count())
        .map(|u| {
            if set.contains(&u) {
                graph.w(u, v)
            } else {
                -1.0
            }
        })
        .collect();
    star_sequence_dp(&weights, &graph.probs_of(v), graph.patience(v))
        .expect("one weight per offline vertex")
        .0
}

/// Monte Carlo estimate of `OPT(G, r, n)`, the committal benchmark averaged
/// over instantiations.
pub fn opt_committal_iid_mc(
    instance: &TypeGraphInstance,
    config: &SimConfig,
    limits: &BenchmarkLimits,
) -> Result<SimReport> {
    // The benchmark only depends on the multiset of arrivals.
    let cache = std::sync::Mutex::new(HashMap::<Vec<usize>, f64>::new());
    estimate_value(
        |seed, _| {
            let arrivals = instance.instantiate(seed).arrivals;
            let mut key = arrivals.clone();
            key.sort_unstable();
            if let Some(&x) = cache.lock().expect("cache lock").get(&key) {
                return Ok(x);
            }
            let graph = instance.type_graph().induced_subgraph(&key)?;
            let value = opt_committal_exact(&graph, limits)?;
            cache.lock().expect("cache lock").insert(key, value);
            Ok(value)
        },
        config,
    )
}
