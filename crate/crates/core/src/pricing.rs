//! Pricing for the tuple LPs: the ordered-probe dynamic program, the dual
//! separation oracle, and a column-generation driver built on both.

use crate::error::{Error, Result};
use crate::formulations::{
    edge_vars_from_solution, tuple_column_data, EdgeVariables, FormulationInput, FormulationKind,
    TupleColumn,
};
use crate::graph::StochasticGraph;
use crate::lp::{self, LinearProgram};

/// A column prices out only when it beats its threshold by more than this.
pub const VIOLATION_MARGIN: f64 = 1e-8;

/// Default bound on the number of generated columns.
pub const DEFAULT_COLUMN_CAP: usize = 100_000;

/// Maximizes `Σ_i w_{u_i} · p_{u_i} · Π_{j<i} (1 − p_{u_j})` over ordered
/// distinct tuples of length at most `budget`.
///
/// Returns the value and the maximizing tuple in probe order. Items with
/// negative weight never help and are discarded; the rest are probed by
/// non-increasing weight.
pub fn star_sequence_dp(
    weights: &[f64],
    probs: &[f64],
    budget: usize,
) -> Result<(f64, Vec<usize>)> {
    if weights.len() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights but {} probabilities",
            weights.len(),
            probs.len()
        )));
    }
    let mut items: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    items.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let n = items.len();
    let budget = budget.min(n);
    if budget == 0 {
        return Ok((0.0, Vec::new()));
    }
    // f[i][k]: best value using items[i..] with k probes left.
    let width = budget + 1;
    let mut f = vec![0.0; (n + 1) * width];
    for i in (0..n).rev() {
        let (w, p) = (weights[items[i]], probs[items[i]]);
        for k in 1..width {
            let skip = f[(i + 1) * width + k];
            let take = p * w + (1.0 - p) * f[(i + 1) * width + k - 1];
            f[i * width + k] = if take > skip { take } else { skip };
        }
    }
    let mut tuple = Vec::new();
    let mut k = budget;
    for i in 0..n {
        if k == 0 {
            break;
        }
        if f[i * width + k] != f[(i + 1) * width + k] {
            tuple.push(items[i]);
            k -= 1;
            // Entries after a sure success are never probed.
            if probs[items[i]] >= 1.0 {
                break;
            }
        }
    }
    Ok((f[budget], tuple))
}

/// A tuple whose dual constraint is violated.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub online_vertex: usize,
    pub tuple: Vec<usize>,
    /// `φ(u) = Σ_i (w_{u_i,v} − α_{u_i}) g^i`.
    pub phi: f64,
    pub threshold: f64,
}

/// The pricing problem of online vertex `v`: maximum `φ` and its tuple.
pub fn price_vertex(graph: &StochasticGraph, alpha: &[f64], v: usize) -> (f64, Vec<usize>) {
    let adjusted: Vec<f64> = (0..graph.offline_count())
        .map(|u| graph.w(u, v) - alpha[u])
        .collect();
    star_sequence_dp(&adjusted, &graph.probs_of(v), graph.patience(v))
        .expect("one adjusted weight per offline vertex")
}

fn threshold(beta: &[f64], rate_scale: Option<&[f64]>, v: usize) -> f64 {
    match rate_scale {
        Some(r) => beta[v] / r[v],
        None => beta[v],
    }
}

/// Returns the first online vertex (with its maximizing tuple) whose pricing
/// value exceeds its threshold, or `None` when `(alpha, beta)` is feasible
/// for the dual program.
///
/// Without `rate_scale` the threshold is `β_v`. With `rate_scale = r`, the
/// duals are read as those of the rate-normalized master (columns
/// `x_v = y_v / r_v`, online rows `≤ 1`), whose threshold is `β_v / r_v`.
pub fn separation_oracle(
    graph: &StochasticGraph,
    alpha: &[f64],
    beta: &[f64],
    rate_scale: Option<&[f64]>,
) -> Result<Option<Violation>> {
    check_duals(graph, alpha, beta, rate_scale)?;
    for v in 0..graph.online_count() {
        if let Some(violation) = vertex_violation(graph, alpha, beta, rate_scale, v) {
            return Ok(Some(violation));
        }
    }
    Ok(None)
}

fn vertex_violation(
    graph: &StochasticGraph,
    alpha: &[f64],
    beta: &[f64],
    rate_scale: Option<&[f64]>,
    v: usize,
) -> Option<Violation> {
    let (phi, tuple) = price_vertex(graph, alpha, v);
    let threshold = threshold(beta, rate_scale, v);
    (phi > threshold + VIOLATION_MARGIN).then_some(Violation {
        online_vertex: v,
        tuple,
        phi,
        threshold,
    })
}

fn check_duals(
    graph: &StochasticGraph,
    alpha: &[f64],
    beta: &[f64],
    rate_scale: Option<&[f64]>,
) -> Result<()> {
    if alpha.len() != graph.offline_count() || beta.len() != graph.online_count() {
        return Err(Error::DimensionMismatch(format!(
            "duals of length ({}, {}) for a {}x{} graph",
            alpha.len(),
            beta.len(),
            graph.offline_count(),
            graph.online_count()
        )));
    }
    if let Some(r) = rate_scale {
        if r.len() != graph.online_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} rates for {} online vertices",
                r.len(),
                graph.online_count()
            )));
        }
    }
    Ok(())
}

/// Outcome of [`column_generation_solve`].
#[derive(Clone, Debug)]
pub struct ColumnGenerationResult {
    pub objective: f64,
    /// Columns with positive value; values are `x_v(u)` for LP-new and
    /// `y_v(u)` for LP-new-iid.
    pub columns: Vec<TupleColumn>,
    pub edge_vars: EdgeVariables,
    /// Offline and online duals of the final master.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Restricted-master objective after each solve.
    pub objective_trace: Vec<f64>,
    /// Every column the master ever held.
    pub generated: usize,
}

/// Solves LP-new or LP-new-iid by column generation with the default cap.
pub fn column_generation_solve<'a>(
    input: impl Into<FormulationInput<'a>>,
    kind: FormulationKind,
    tol: f64,
) -> Result<ColumnGenerationResult> {
    column_generation_with_cap(input, kind, tol, DEFAULT_COLUMN_CAP)
}

pub fn column_generation_with_cap<'a>(
    input: impl Into<FormulationInput<'a>>,
    kind: FormulationKind,
    tol: f64,
    column_cap: usize,
) -> Result<ColumnGenerationResult> {
    let (graph, rates) = match (kind, input.into()) {
        (FormulationKind::New, FormulationInput::Graph(g)) => (g, None),
        (FormulationKind::NewIid, FormulationInput::Iid(i)) => (i.type_graph(), Some(i.rates())),
        (FormulationKind::New, _) => {
            return Err(Error::InstanceMismatch {
                expected: "a stochastic graph",
            })
        }
        (FormulationKind::NewIid, _) => {
            return Err(Error::InstanceMismatch {
                expected: "a type graph",
            })
        }
        (other, _) => {
            return Err(Error::InvalidParameter(format!(
                "column generation solves `new` or `new_iid`, not `{other}`"
            )))
        }
    };
    let (m, n) = (graph.offline_count(), graph.online_count());
    let scale = |v: usize| rates.map_or(1.0, |r| r[v]);

    let mut master = LinearProgram::new(Vec::new());
    for _ in 0..m + n {
        master.add_row([], 1.0);
    }
    let mut owners: Vec<(usize, Vec<usize>)> = Vec::new();
    let add = |master: &mut LinearProgram,
               owners: &mut Vec<(usize, Vec<usize>)>,
               v: usize,
               tuple: Vec<usize>| {
        let r = scale(v);
        let (cost, entries) = tuple_column_data(graph, v, &tuple);
        let mut entries: Vec<(usize, f64)> = entries.into_iter().map(|(u, g)| (u, r * g)).collect();
        entries.push((m + v, 1.0));
        master.add_column(r * cost, entries, String::new());
        owners.push((v, tuple));
    };
    for v in 0..n {
        if graph.patience(v) == 0 {
            continue;
        }
        let best = (0..m).filter(|&u| graph.p(u, v) > 0.0).max_by(|&a, &b| {
            let (va, vb) = (graph.w(a, v) * graph.p(a, v), graph.w(b, v) * graph.p(b, v));
            va.total_cmp(&vb).then(b.cmp(&a))
        });
        if let Some(u) = best {
            add(&mut master, &mut owners, v, vec![u]);
        }
    }

    let mut trace = Vec::new();
    loop {
        let sol = lp::solve(&master, tol)?.optimal()?;
        trace.push(sol.objective_value);
        let alpha: Vec<f64> = sol.duals[..m].iter().map(|&a| a.max(0.0)).collect();
        let beta: Vec<f64> = sol.duals[m..].iter().map(|&b| b.max(0.0)).collect();
        let mut added = 0;
        for v in 0..n {
            if let Some(viol) = vertex_violation(graph, &alpha, &beta, rates, v) {
                let exists = owners.iter().any(|(ov, t)| *ov == v && *t == viol.tuple);
                if !exists {
                    add(&mut master, &mut owners, v, viol.tuple);
                    added += 1;
                }
            }
        }
        if owners.len() > column_cap {
            return Err(Error::CapExceeded(format!(
                "column generation exceeded {column_cap} columns"
            )));
        }
        if added == 0 {
            let columns: Vec<TupleColumn> = owners
                .iter()
                .zip(&sol.primal)
                .filter(|(_, &x)| x > 0.0)
                .map(|((v, tuple), &x)| TupleColumn {
                    online_vertex: *v,
                    tuple: tuple.clone(),
                    value: x * scale(*v),
                })
                .collect();
            let edge_vars = edge_vars_from_solution(graph, &columns, rates, 1e-6)?;
            return Ok(ColumnGenerationResult {
                objective: sol.objective_value,
                columns,
                edge_vars,
                alpha,
                beta,
                objective_trace: trace,
                generated: owners.len(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::{build_formulation, g_coeffs, lp_optimum};
    use crate::graph::{
        paper_example, random_graph, random_type_graph, RandomGraphConfig, WeightMode,
    };
    use crate::lp::DEFAULT_TOL;
    use proptest::prelude::*;

    /// Exhaustive search over all ordered distinct tuples of length ≤ budget.
    fn brute_force(weights: &[f64], probs: &[f64], budget: usize) -> f64 {
        fn go(w: &[f64], p: &[f64], left: usize, used: &mut Vec<bool>, fail: f64) -> f64 {
            let mut best = 0.0f64;
            if left == 0 {
                return best;
            }
            for i in 0..w.len() {
                if !used[i] {
                    used[i] = true;
                    let here = fail * p[i] * w[i] + go(w, p, left - 1, used, fail * (1.0 - p[i]));
                    best = best.max(here);
                    used[i] = false;
                }
            }
            best
        }
        go(weights, probs, budget, &mut vec![false; weights.len()], 1.0)
    }

    fn tuple_value(weights: &[f64], probs: &[f64], tuple: &[usize]) -> f64 {
        let mut fail = 1.0;
        tuple
            .iter()
            .map(|&i| {
                let x = fail * probs[i] * weights[i];
                fail *= 1.0 - probs[i];
                x
            })
            .sum()
    }

    #[test]
    fn dp_examples() {
        let (v, t) = star_sequence_dp(&[3.0, 2.0], &[0.5, 0.5], 2).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        assert_eq!(t, vec![0, 1]);
        assert!((brute_force(&[3.0, 2.0], &[0.5, 0.5], 2) - 2.0).abs() < 1e-15);
        assert_eq!(star_sequence_dp(&[1.0], &[1.0], 1).unwrap(), (1.0, vec![0]));
        assert_eq!(star_sequence_dp(&[1.0], &[1.0], 0).unwrap(), (0.0, vec![]));
        assert_eq!(
            star_sequence_dp(&[-1.0, -2.0], &[1.0, 0.5], 2).unwrap(),
            (0.0, vec![])
        );
        assert!(matches!(
            star_sequence_dp(&[1.0], &[1.0, 0.5], 1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dp_prefers_skip_on_ties() {
        // Probing the second item after a sure success adds nothing.
        let (_, t) = star_sequence_dp(&[2.0, 1.0], &[1.0, 0.5], 2).unwrap();
        assert_eq!(t, vec![0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn dp_matches_brute_force(
            items in prop::collection::vec((-1.0f64..5.0, 0.0f64..=1.0), 0..=6),
            budget in 0usize..=3,
        ) {
            let (w, p): (Vec<f64>, Vec<f64>) = items.into_iter().unzip();
            let (value, tuple) = star_sequence_dp(&w, &p, budget).unwrap();
            let oracle = brute_force(&w, &p, budget);
            prop_assert!((value - oracle).abs() <= 1e-12 * (1.0 + oracle));
            prop_assert!((tuple_value(&w, &p, &tuple) - value).abs() <= 1e-12 * (1.0 + value));
            prop_assert!(tuple.len() <= budget);
            prop_assert!(tuple.windows(2).all(|t| w[t[0]] >= w[t[1]]));
        }
    }

    #[test]
    fn oracle_with_dominating_alpha_finds_nothing() {
        let g = random_graph(&RandomGraphConfig::default(), 3);
        let alpha: Vec<f64> = (0..g.offline_count())
            .map(|u| (0..g.online_count()).map(|v| g.w(u, v)).fold(0.0, f64::max))
            .collect();
        let beta = vec![0.0; g.online_count()];
        assert_eq!(separation_oracle(&g, &alpha, &beta, None).unwrap(), None);
    }

    #[test]
    fn oracle_with_zero_duals_returns_dp_argmax() {
        let g = random_graph(&RandomGraphConfig::default(), 4);
        let alpha = vec![0.0; g.offline_count()];
        let beta = vec![0.0; g.online_count()];
        let viol = separation_oracle(&g, &alpha, &beta, None)
            .unwrap()
            .expect("violated");
        let v = viol.online_vertex;
        let best = crate::formulations::enumerate_tuples(&g, v)
            .iter()
            .map(|t| tuple_column_data(&g, v, t).0)
            .fold(0.0, f64::max);
        assert!((viol.phi - best).abs() < 1e-12);
        assert!((tuple_column_data(&g, v, &viol.tuple).0 - best).abs() < 1e-12);
    }

    #[test]
    fn oracle_accepts_optimal_enumerated_duals() {
        for seed in 0..5 {
            let g = random_graph(&RandomGraphConfig::default(), seed);
            let f = build_formulation(FormulationKind::New, &g, None).unwrap();
            let sol = f.solve(DEFAULT_TOL).unwrap();
            let m = g.offline_count();
            let alpha: Vec<f64> = sol.lp.duals[..m].iter().map(|&a| a.max(0.0)).collect();
            let beta: Vec<f64> = sol.lp.duals[m..].iter().map(|&b| b.max(0.0)).collect();
            assert_eq!(separation_oracle(&g, &alpha, &beta, None).unwrap(), None);
        }
    }

    #[test]
    fn oracle_dimension_check() {
        let g = random_graph(&RandomGraphConfig::default(), 0);
        assert!(separation_oracle(&g, &[0.0], &[0.0], None).is_err());
    }

    #[test]
    fn colgen_matches_enumeration() {
        let cfg = RandomGraphConfig {
            offline: 4,
            online: 3,
            max_patience: 3,
            ..Default::default()
        };
        for seed in 0..15 {
            let g = random_graph(&cfg, seed);
            let enumerated = lp_optimum(FormulationKind::New, &g, DEFAULT_TOL).unwrap();
            let cg = column_generation_solve(&g, FormulationKind::New, DEFAULT_TOL).unwrap();
            assert!(
                (cg.objective - enumerated).abs() <= 1e-7 * (1.0 + enumerated),
                "seed {seed}: {} vs {enumerated}",
                cg.objective
            );
            assert!(cg.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            for v in 0..g.online_count() {
                assert!(price_vertex(&g, &cg.alpha, v).0 <= cg.beta[v] + 1e-7);
            }
            // Generated columns with positive value have zero reduced cost.
            for col in &cg.columns {
                let v = col.online_vertex;
                let g_i = g_coeffs(&g, v, &col.tuple);
                let reduced = tuple_column_data(&g, v, &col.tuple).0
                    - col
                        .tuple
                        .iter()
                        .zip(&g_i)
                        .map(|(&u, g)| g * cg.alpha[u])
                        .sum::<f64>()
                    - cg.beta[v];
                assert!(reduced.abs() < 1e-7, "reduced cost {reduced}");
            }
        }
    }

    #[test]
    fn colgen_iid_matches_enumeration() {
        let cfg = RandomGraphConfig {
            offline: 3,
            online: 3,
            max_patience: 2,
            ..Default::default()
        };
        for seed in 0..10 {
            let inst = random_type_graph(&cfg, 4, seed);
            let enumerated = lp_optimum(FormulationKind::NewIid, &inst, DEFAULT_TOL).unwrap();
            let cg = column_generation_solve(&inst, FormulationKind::NewIid, DEFAULT_TOL).unwrap();
            assert!((cg.objective - enumerated).abs() <= 1e-7 * (1.0 + enumerated));
            for v in 0..3 {
                let mass: f64 = cg
                    .columns
                    .iter()
                    .filter(|c| c.online_vertex == v)
                    .map(|c| c.value)
                    .sum();
                assert!(mass <= inst.rate(v) + 1e-7);
            }
        }
    }

    #[test]
    fn colgen_unit_patience_matches_std() {
        let cfg = RandomGraphConfig {
            max_patience: 1,
            ..Default::default()
        };
        for seed in 0..10 {
            let g = random_graph(&cfg, seed);
            let std = lp_optimum(FormulationKind::Std, &g, DEFAULT_TOL).unwrap();
            let cg = column_generation_solve(&g, FormulationKind::New, DEFAULT_TOL).unwrap();
            assert!((cg.objective - std).abs() <= 1e-8 * (1.0 + std));
        }
    }

    #[test]
    fn colgen_order_gap_and_empty() {
        let g = paper_example("order_gap", None).unwrap();
        let enumerated = lp_optimum(FormulationKind::New, &g, DEFAULT_TOL).unwrap();
        let cg = column_generation_solve(&g, FormulationKind::New, DEFAULT_TOL).unwrap();
        assert!((cg.objective - enumerated).abs() < 1e-7);

        let empty =
            StochasticGraph::new(2, 0, vec![], vec![], vec![], WeightMode::Unweighted).unwrap();
        let cg = column_generation_solve(&empty, FormulationKind::New, DEFAULT_TOL).unwrap();
        assert_eq!(cg.objective, 0.0);
        assert!(cg.columns.is_empty());
    }

    #[test]
    fn colgen_rejects_wrong_kind() {
        let g = paper_example("order_gap", None).unwrap();
        assert!(column_generation_solve(&g, FormulationKind::Std, DEFAULT_TOL).is_err());
        assert!(column_generation_solve(&g, FormulationKind::NewIid, DEFAULT_TOL).is_err());
    }
}
