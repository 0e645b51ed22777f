//! LP relaxations of the committal benchmark.
//!
//! Every builder produces a [`LinearProgram`] in `max c·x, Ax <= b, x >= 0`
//! form together with a description of each column. Tuple-indexed programs
//! enumerate their columns in lexicographic order of `(v, k, tuple)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Instance, StochasticGraph, TypeGraphInstance};
use crate::lp::{self, LinearProgram, LpSolution};

/// Default bound on the number of enumerated tuple columns.
pub const DEFAULT_ENUM_CAP: usize = 200_000;
/// Largest offline side accepted by the relaxed-benchmark program.
pub const REL_MAX_OFFLINE: usize = 6;
/// Largest patience accepted by the relaxed-benchmark program.
pub const REL_MAX_PATIENCE: usize = 3;
/// Largest offline side accepted by the star-constrained program.
pub const DP_MAX_OFFLINE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationKind {
    Std,
    New,
    NewDual,
    StdNon,
    Rel,
    Dp,
    StdIid,
    NewIid,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 8] = [
        FormulationKind::Std,
        FormulationKind::New,
        FormulationKind::NewDual,
        FormulationKind::StdNon,
        FormulationKind::Rel,
        FormulationKind::Dp,
        FormulationKind::StdIid,
        FormulationKind::NewIid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Std => "std",
            FormulationKind::New => "new",
            FormulationKind::NewDual => "new_dual",
            FormulationKind::StdNon => "std_non",
            FormulationKind::Rel => "rel",
            FormulationKind::Dp => "dp",
            FormulationKind::StdIid => "std_iid",
            FormulationKind::NewIid => "new_iid",
        }
    }

    pub fn is_iid(self) -> bool {
        matches!(self, FormulationKind::StdIid | FormulationKind::NewIid)
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        FormulationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::Parse(format!("unknown formulation `{s}`")))
    }
}

/// An ordered probe tuple of one online vertex with its LP value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleColumn {
    pub online_vertex: usize,
    pub tuple: Vec<usize>,
    pub value: f64,
}

/// Per-edge probe marginals `x̃[u][v]` induced by a tuple solution.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeVariables {
    offline: usize,
    online: usize,
    values: Vec<f64>,
}

impl EdgeVariables {
    pub fn zeros(offline: usize, online: usize) -> Self {
        EdgeVariables {
            offline,
            online,
            values: vec![0.0; offline * online],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.online + v]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.offline, self.online)
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.online.max(1))
            .take(self.offline)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Per-offline-vertex share `c_u` of an LP objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionVector {
    pub values: Vec<f64>,
}

impl ContributionVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// What a column of a built program stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variable {
    /// `x_{u,v}` of the edge-based programs.
    Edge { u: usize, v: usize },
    /// `z_{u,v}` of the non-committal program.
    EdgeMatch { u: usize, v: usize },
    /// `x_v(u)` or `y_v(u)`.
    Tuple { v: usize, tuple: Vec<usize> },
    /// `α_v(R)`.
    Probe { v: usize, set: Vec<usize> },
    /// `z_{u,v}(R)`.
    RelMatch { u: usize, v: usize, set: Vec<usize> },
    /// Dual variable of offline row `u`.
    OfflineDual(usize),
    /// Dual variable of online row `v`.
    OnlineDual(usize),
}

fn join(items: &[usize]) -> String {
    items
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Edge { u, v } => write!(f, "x[u{u},v{v}]"),
            Variable::EdgeMatch { u, v } => write!(f, "z[u{u},v{v}]"),
            Variable::Tuple { v, tuple } => write!(f, "x[v{v};{}]", join(tuple)),
            Variable::Probe { v, set } => write!(f, "alpha[v{v};{{{}}}]", join(set)),
            Variable::RelMatch { u, v, set } => write!(f, "z[u{u},v{v};{{{}}}]", join(set)),
            Variable::OfflineDual(u) => write!(f, "alpha[u{u}]"),
            Variable::OnlineDual(v) => write!(f, "beta[v{v}]"),
        }
    }
}

/// Borrowed view of either input kind.
#[derive(Clone, Copy, Debug)]
pub enum FormulationInput<'a> {
    Graph(&'a StochasticGraph),
    Iid(&'a TypeGraphInstance),
}

impl<'a> From<&'a StochasticGraph> for FormulationInput<'a> {
    fn from(g: &'a StochasticGraph) -> Self {
        FormulationInput::Graph(g)
    }
}

impl<'a> From<&'a TypeGraphInstance> for FormulationInput<'a> {
    fn from(i: &'a TypeGraphInstance) -> Self {
        FormulationInput::Iid(i)
    }
}

impl<'a> From<&'a Instance> for FormulationInput<'a> {
    fn from(i: &'a Instance) -> Self {
        match i {
            Instance::Graph(g) => FormulationInput::Graph(g),
            Instance::Iid(t) => FormulationInput::Iid(t),
        }
    }
}

/// `OPT(v, R)`: the committal benchmark on the star of `v` restricted to `R`.
pub type StarOracle<'a> = &'a dyn Fn(usize, &[usize]) -> f64;

/// A built program and the meaning of each of its columns.
#[derive(Clone, Debug)]
pub struct Formulation {
    pub kind: FormulationKind,
    pub lp: LinearProgram,
    pub variables: Vec<Variable>,
    /// The dual program is a minimization encoded as `max -(...)`; its
    /// natural optimum is the negated LP objective.
    pub negated: bool,
}

/// An optimal solution of a [`Formulation`] in the formulation's own sense.
#[derive(Clone, Debug)]
pub struct FormulationSolution {
    pub objective: f64,
    pub lp: LpSolution,
}

impl Formulation {
    pub fn solve(&self, tol: f64) -> Result<FormulationSolution> {
        let sol = lp::solve(&self.lp, tol)?.optimal()?;
        let objective = if self.negated {
            -sol.objective_value
        } else {
            sol.objective_value
        };
        Ok(FormulationSolution { objective, lp: sol })
    }

    /// Tuple columns with positive value in `solution`.
    pub fn tuple_columns(&self, solution: &LpSolution) -> Vec<TupleColumn> {
        self.variables
            .iter()
            .zip(&solution.primal)
            .filter_map(|(var, &x)| match var {
                Variable::Tuple { v, tuple } if x > 0.0 => Some(TupleColumn {
                    online_vertex: *v,
                    tuple: tuple.clone(),
                    value: x,
                }),
                _ => None,
            })
            .collect()
    }
}

/// `g^i_v(u) = p_{u_i,v} · Π_{j<i} (1 − p_{u_j,v})` with 1-based `i`.
pub fn g_coeff(graph: &StochasticGraph, v: usize, tuple: &[usize], i: usize) -> Result<f64> {
    check_tuple(graph, v, tuple)?;
    if i == 0 || i > tuple.len() {
        return Err(Error::IndexOutOfRange(format!(
            "position {i} of a tuple of length {}",
            tuple.len()
        )));
    }
    Ok(g_coeffs(graph, v, tuple)[i - 1])
}

/// All `g` coefficients of `tuple`, in probe order. Does not validate.
pub fn g_coeffs(graph: &StochasticGraph, v: usize, tuple: &[usize]) -> Vec<f64> {
    let mut fail = 1.0;
    tuple
        .iter()
        .map(|&u| {
            let p = graph.p(u, v);
            let g = p * fail;
            fail *= 1.0 - p;
            g
        })
        .collect()
}

/// Objective coefficient `Σ_i w_{u_i,v} g^i` and offline-row entries of a
/// tuple column.
pub fn tuple_column_data(
    graph: &StochasticGraph,
    v: usize,
    tuple: &[usize],
) -> (f64, Vec<(usize, f64)>) {
    let g = g_coeffs(graph, v, tuple);
    let cost = tuple.iter().zip(&g).map(|(&u, &g)| graph.w(u, v) * g).sum();
    (cost, tuple.iter().copied().zip(g).collect())
}

pub(crate) fn check_tuple(graph: &StochasticGraph, v: usize, tuple: &[usize]) -> Result<()> {
    if v >= graph.online_count() {
        return Err(Error::IndexOutOfRange(format!("online vertex {v}")));
    }
    for (i, &u) in tuple.iter().enumerate() {
        if u >= graph.offline_count() {
            return Err(Error::IndexOutOfRange(format!("offline vertex {u}")));
        }
        if tuple[..i].contains(&u) {
            return Err(Error::InvalidParameter(format!(
                "duplicate offline vertex {u} in tuple"
            )));
        }
    }
    if tuple.len() > graph.patience(v) {
        return Err(Error::InvalidParameter(format!(
            "tuple of length {} exceeds patience {} of v{v}",
            tuple.len(),
            graph.patience(v)
        )));
    }
    Ok(())
}

/// Number of ordered tuples counted by the enumeration cap:
/// `Σ_v Σ_{k ≤ ℓ_v} |U|! / (|U| − k)!`.
pub fn tuple_count(graph: &StochasticGraph) -> usize {
    let m = graph.offline_count();
    let mut total = 0usize;
    for v in 0..graph.online_count() {
        let mut falling = 1usize;
        for k in 1..=graph.patience(v) {
            falling = falling.saturating_mul(m + 1 - k);
            total = total.saturating_add(falling);
        }
    }
    total
}

/// All ordered distinct tuples of length `1..=ℓ_v` over the offline vertices
/// with `p > 0`, by length then lexicographically.
pub fn enumerate_tuples(graph: &StochasticGraph, v: usize) -> Vec<Vec<usize>> {
    let candidates: Vec<usize> = (0..graph.offline_count())
        .filter(|&u| graph.p(u, v) > 0.0)
        .collect();
    let mut out = Vec::new();
    for k in 1..=graph.patience(v).min(candidates.len()) {
        let mut cur = Vec::with_capacity(k);
        let mut used = vec![false; candidates.len()];
        extend_tuples(&candidates, k, &mut cur, &mut used, &mut out);
    }
    out
}

fn extend_tuples(
    candidates: &[usize],
    k: usize,
    cur: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in 0..candidates.len() {
        if !used[i] {
            used[i] = true;
            cur.push(candidates[i]);
            extend_tuples(candidates, k, cur, used, out);
            cur.pop();
            used[i] = false;
        }
    }
}

/// Subsets of `0..m` as sorted vectors, of size between `lo` and `hi`, by size
/// then lexicographically.
fn subsets(m: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for k in lo..=hi.min(m) {
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            out.push(pick.clone());
            let mut i = k;
            let advanced = loop {
                if i == 0 {
                    break false;
                }
                i -= 1;
                if pick[i] < m - k + i {
                    pick[i] += 1;
                    for j in i + 1..k {
                        pick[j] = pick[j - 1] + 1;
                    }
                    break true;
                }
            };
            if !advanced {
                break;
            }
        }
    }
    out
}

/// `p(S, v) = 1 − Π_{u∈S} (1 − p_{u,v})`.
pub fn set_probability(graph: &StochasticGraph, v: usize, set: &[usize]) -> f64 {
    1.0 - set.iter().map(|&u| 1.0 - graph.p(u, v)).product::<f64>()
}

/// Builds `kind` with the default enumeration cap.
pub fn build_formulation<'a>(
    kind: FormulationKind,
    input: impl Into<FormulationInput<'a>>,
    oracle: Option<StarOracle<'_>>,
) -> Result<Formulation> {
    build_formulation_with_cap(kind, input, oracle, DEFAULT_ENUM_CAP)
}

pub fn build_formulation_with_cap<'a>(
    kind: FormulationKind,
    input: impl Into<FormulationInput<'a>>,
    oracle: Option<StarOracle<'_>>,
    cap: usize,
) -> Result<Formulation> {
    let input = input.into();
    let (graph, rates) = match (kind.is_iid(), input) {
        (false, FormulationInput::Graph(g)) => (g, None),
        (true, FormulationInput::Iid(i)) => (i.type_graph(), Some(i.rates())),
        (false, FormulationInput::Iid(_)) => {
            return Err(Error::InstanceMismatch {
                expected: "a stochastic graph",
            })
        }
        (true, FormulationInput::Graph(_)) => {
            return Err(Error::InstanceMismatch {
                expected: "a type graph",
            })
        }
    };
    match kind {
        FormulationKind::Std => Ok(edge_program(kind, graph, None, None)),
        FormulationKind::StdIid => Ok(edge_program(kind, graph, rates, None)),
        FormulationKind::Dp => {
            let oracle = oracle.ok_or(Error::MissingOracle)?;
            if graph.offline_count() > DP_MAX_OFFLINE {
                return Err(Error::CapExceeded(format!(
                    "LP-DP enumerates all subsets of U; |U| = {} > {DP_MAX_OFFLINE}",
                    graph.offline_count()
                )));
            }
            Ok(edge_program(kind, graph, None, Some(oracle)))
        }
        FormulationKind::New | FormulationKind::NewIid => {
            check_cap(graph, cap)?;
            Ok(tuple_program(kind, graph, rates))
        }
        FormulationKind::NewDual => {
            check_cap(graph, cap)?;
            Ok(dual_program(graph))
        }
        FormulationKind::StdNon => Ok(noncommittal_program(graph)),
        FormulationKind::Rel => rel_program(graph),
    }
}

fn check_cap(graph: &StochasticGraph, cap: usize) -> Result<()> {
    let count = tuple_count(graph);
    if count > cap {
        return Err(Error::CapExceeded(format!(
            "{count} tuple columns exceed the enumeration cap {cap}"
        )));
    }
    Ok(())
}

/// LP-std, LP-std-iid and LP-DP share the edge variables `x_{u,v}`.
fn edge_program(
    kind: FormulationKind,
    graph: &StochasticGraph,
    rates: Option<&[f64]>,
    oracle: Option<StarOracle<'_>>,
) -> Formulation {
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut index = vec![None; m * n];
    let mut lp = LinearProgram::new(Vec::new());
    let mut variables = Vec::new();
    for u in 0..m {
        for v in 0..n {
            if graph.p(u, v) > 0.0 {
                let var = Variable::Edge { u, v };
                index[u * n + v] =
                    Some(lp.add_column(graph.w(u, v) * graph.p(u, v), [], var.to_string()));
                variables.push(var);
            }
        }
    }
    let col = |u: usize, v: usize| index[u * n + v];
    let rate = |v: usize| rates.map_or(1.0, |r| r[v]);
    for u in 0..m {
        lp.add_row(
            (0..n).filter_map(|v| col(u, v).map(|j| (j, graph.p(u, v)))),
            1.0,
        );
    }
    for v in 0..n {
        lp.add_row(
            (0..m).filter_map(|u| col(u, v).map(|j| (j, graph.p(u, v)))),
            rate(v),
        );
        lp.add_row(
            (0..m).filter_map(|u| col(u, v).map(|j| (j, 1.0))),
            rate(v) * graph.patience(v) as f64,
        );
    }
    if let Some(oracle) = oracle {
        for v in 0..n {
            for set in subsets(m, 1, m) {
                let coeffs: Vec<(usize, f64)> = set
                    .iter()
                    .filter_map(|&u| col(u, v).map(|j| (j, graph.w(u, v) * graph.p(u, v))))
                    .collect();
                if !coeffs.is_empty() {
                    lp.add_row(coeffs, oracle(v, &set));
                }
            }
        }
    }
    for u in 0..m {
        for v in 0..n {
            if let Some(j) = col(u, v) {
                lp.add_row([(j, 1.0)], rate(v));
            }
        }
    }
    Formulation {
        kind,
        lp,
        variables,
        negated: false,
    }
}

/// LP-new and LP-new-iid: rows `0..|U|` are the offline rows, rows
/// `|U|..|U|+|V|` the online rows.
fn tuple_program(
    kind: FormulationKind,
    graph: &StochasticGraph,
    rates: Option<&[f64]>,
) -> Formulation {
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut lp = LinearProgram::new(Vec::new());
    for _ in 0..m {
        lp.add_row([], 1.0);
    }
    for v in 0..n {
        lp.add_row([], rates.map_or(1.0, |r| r[v]));
    }
    let mut variables = Vec::new();
    for v in 0..n {
        for tuple in enumerate_tuples(graph, v) {
            let (cost, mut entries) = tuple_column_data(graph, v, &tuple);
            entries.push((m + v, 1.0));
            let var = Variable::Tuple { v, tuple };
            lp.add_column(cost, entries, var.to_string());
            variables.push(var);
        }
    }
    Formulation {
        kind,
        lp,
        variables,
        negated: false,
    }
}

/// LP-new-dual: `min Σα + Σβ` subject to `Σ_i g^i α_{u_i} + β_v ≥ Σ_i w g^i`
/// for every tuple column.
fn dual_program(graph: &StochasticGraph) -> Formulation {
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut lp = LinearProgram::new(vec![-1.0; m + n]);
    let mut variables: Vec<Variable> = (0..m).map(Variable::OfflineDual).collect();
    variables.extend((0..n).map(Variable::OnlineDual));
    lp.column_labels = variables.iter().map(Variable::to_string).collect();
    for v in 0..n {
        for tuple in enumerate_tuples(graph, v) {
            let (cost, entries) = tuple_column_data(graph, v, &tuple);
            let mut row: Vec<(usize, f64)> = entries.into_iter().map(|(u, g)| (u, -g)).collect();
            row.push((m + v, -1.0));
            lp.add_row(row, -cost);
        }
    }
    Formulation {
        kind: FormulationKind::NewDual,
        lp,
        variables,
        negated: true,
    }
}

/// LP-std-non with `x_e` and `z_e` per edge of positive probability.
fn noncommittal_program(graph: &StochasticGraph) -> Formulation {
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut lp = LinearProgram::new(Vec::new());
    let mut variables = Vec::new();
    let mut edges = Vec::new();
    for u in 0..m {
        for v in 0..n {
            if graph.p(u, v) > 0.0 {
                let x = Variable::Edge { u, v };
                let z = Variable::EdgeMatch { u, v };
                let jx = lp.add_column(0.0, [], x.to_string());
                let jz = lp.add_column(graph.w(u, v), [], z.to_string());
                variables.push(x);
                variables.push(z);
                edges.push((u, v, jx, jz));
            }
        }
    }
    for u in 0..m {
        lp.add_row(edges.iter().filter(|e| e.0 == u).map(|e| (e.3, 1.0)), 1.0);
    }
    for v in 0..n {
        lp.add_row(edges.iter().filter(|e| e.1 == v).map(|e| (e.3, 1.0)), 1.0);
        lp.add_row(
            edges.iter().filter(|e| e.1 == v).map(|e| (e.2, 1.0)),
            graph.patience(v) as f64,
        );
    }
    for &(u, v, jx, jz) in &edges {
        lp.add_row([(jz, 1.0), (jx, -graph.p(u, v))], 0.0);
        lp.add_row([(jx, 1.0)], 1.0);
    }
    Formulation {
        kind: FormulationKind::StdNon,
        lp,
        variables,
        negated: false,
    }
}

/// LP-rel over all nonempty `R` with `|R| ≤ ℓ_v`; `z_{u,v}(R)` exists only
/// for `u ∈ R`.
fn rel_program(graph: &StochasticGraph) -> Result<Formulation> {
    let (m, n) = (graph.offline_count(), graph.online_count());
    if m > REL_MAX_OFFLINE {
        return Err(Error::CapExceeded(format!(
            "LP-rel needs |U| <= {REL_MAX_OFFLINE}, got {m}"
        )));
    }
    if let Some(&l) = graph
        .patience_values()
        .iter()
        .find(|&&l| l > REL_MAX_PATIENCE)
    {
        return Err(Error::CapExceeded(format!(
            "LP-rel needs patience <= {REL_MAX_PATIENCE}, got {l}"
        )));
    }
    let mut lp = LinearProgram::new(Vec::new());
    let mut variables = Vec::new();
    for _ in 0..m {
        lp.add_row([], 1.0);
    }
    for v in 0..n {
        let online_row = lp.num_rows();
        lp.add_row([], 1.0);
        for set in subsets(m, 1, graph.patience(v)) {
            let alpha = Variable::Probe {
                v,
                set: set.clone(),
            };
            let ja = lp.add_column(0.0, [(online_row, 1.0)], alpha.to_string());
            variables.push(alpha);
            let mut z = Vec::with_capacity(set.len());
            for &u in &set {
                let var = Variable::RelMatch {
                    u,
                    v,
                    set: set.clone(),
                };
                z.push(lp.add_column(graph.w(u, v), [(u, 1.0)], var.to_string()));
                variables.push(var);
            }
            for mask in 1u32..(1 << set.len()) {
                let chosen: Vec<usize> = (0..set.len()).filter(|&i| mask >> i & 1 == 1).collect();
                let members: Vec<usize> = chosen.iter().map(|&i| set[i]).collect();
                let mut row: Vec<(usize, f64)> = chosen.iter().map(|&i| (z[i], 1.0)).collect();
                row.push((ja, -set_probability(graph, v, &members)));
                lp.add_row(row, 0.0);
            }
        }
    }
    Ok(Formulation {
        kind: FormulationKind::Rel,
        lp,
        variables,
        negated: false,
    })
}

/// Optimum of `kind` on `input`. LP-DP is given the exact star benchmark as
/// its `OPT(v, R)` oracle; LP-new and LP-new-iid are solved by full
/// enumeration.
pub fn lp_optimum<'a>(
    kind: FormulationKind,
    input: impl Into<FormulationInput<'a>>,
    tol: f64,
) -> Result<f64> {
    let input = input.into();
    let solution = match (kind, input) {
        (FormulationKind::Dp, FormulationInput::Graph(g)) => {
            let oracle = |v: usize, set: &[usize]| crate::benchmarks::opt_star(g, v, set);
            build_formulation(kind, input, Some(&oracle))?.solve(tol)?
        }
        _ => build_formulation(kind, input, None)?.solve(tol)?,
    };
    Ok(solution.objective)
}

/// `x̃[u][v] = Σ g^i · x_v(tuple) / p[u][v]` over tuples placing `u` at `i`.
///
/// Checks the LP-new constraints first: offline rows `≤ 1`, online rows
/// `≤ 1` (or `≤ r_v` when `rates` is given), non-negative values.
pub fn edge_vars_from_solution(
    graph: &StochasticGraph,
    columns: &[TupleColumn],
    rates: Option<&[f64]>,
    tol: f64,
) -> Result<EdgeVariables> {
    let (m, n) = (graph.offline_count(), graph.online_count());
    let mut offline_load = vec![0.0; m];
    let mut online_mass = vec![0.0; n];
    let mut probe_mass = EdgeVariables::zeros(m, n);
    for col in columns {
        let v = col.online_vertex;
        check_tuple(graph, v, &col.tuple)?;
        if !(col.value >= -tol) {
            return Err(Error::Infeasible(format!(
                "negative column value {}",
                col.value
            )));
        }
        online_mass[v] += col.value;
        for (&u, g) in col.tuple.iter().zip(g_coeffs(graph, v, &col.tuple)) {
            offline_load[u] += g * col.value;
            probe_mass.values[u * n + v] += g * col.value;
        }
    }
    for (u, &load) in offline_load.iter().enumerate() {
        if load > 1.0 + tol {
            return Err(Error::Infeasible(format!(
                "offline row u{u} has load {load}"
            )));
        }
    }
    for (v, &mass) in online_mass.iter().enumerate() {
        let cap = rates.map_or(1.0, |r| r[v]);
        if mass > cap + tol {
            return Err(Error::Infeasible(format!(
                "online row v{v} has mass {mass} > {cap}"
            )));
        }
    }
    for u in 0..m {
        for v in 0..n {
            let p = graph.p(u, v);
            let x = &mut probe_mass.values[u * n + v];
            *x = if p > 0.0 { *x / p } else { 0.0 };
        }
    }
    Ok(probe_mass)
}

/// `c_u = Σ_v w[u][v] · p[u][v] · x̃[u][v]`.
pub fn contributions(graph: &StochasticGraph, edge_vars: &EdgeVariables) -> ContributionVector {
    let values = (0..graph.offline_count())
        .map(|u| {
            (0..graph.online_count())
                .map(|v| graph.w(u, v) * graph.p(u, v) * edge_vars.get(u, v))
                .sum()
        })
        .collect();
    ContributionVector { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{paper_example, random_graph, RandomGraphConfig, WeightMode};
    use crate::lp::DEFAULT_TOL;

    fn star(probs: &[f64], weights: &[f64], patience: usize) -> StochasticGraph {
        let p: Vec<Vec<f64>> = probs.iter().map(|&p| vec![p]).collect();
        let w: Vec<Vec<f64>> = weights.iter().map(|&w| vec![w]).collect();
        StochasticGraph::from_matrices(&p, &w, vec![patience], WeightMode::EdgeWeighted).unwrap()
    }

    #[test]
    fn g_coeff_examples() {
        let g = star(&[0.3, 0.5], &[1.0, 1.0], 2);
        assert!((g_coeff(&g, 0, &[0, 1], 1).unwrap() - 0.3).abs() < 1e-15);
        assert!((g_coeff(&g, 0, &[0, 1], 2).unwrap() - 0.35).abs() < 1e-15);
        let g = star(&[1.0, 0.5], &[1.0, 1.0], 2);
        assert_eq!(g_coeff(&g, 0, &[0, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn g_coeff_errors() {
        let g = star(&[0.3, 0.5], &[1.0, 1.0], 2);
        assert!(matches!(
            g_coeff(&g, 0, &[0, 1], 0),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(matches!(
            g_coeff(&g, 0, &[0, 1], 3),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(matches!(
            g_coeff(&g, 0, &[0, 0], 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn g_coeffs_telescope() {
        let g = star(&[0.3, 0.5, 0.9], &[1.0; 3], 3);
        let tuple = [2, 0, 1];
        let sum: f64 = g_coeffs(&g, 0, &tuple).iter().sum();
        let direct = 1.0 - 0.7 * 0.5 * 0.1;
        assert!((sum - direct).abs() < 1e-15);
    }

    #[test]
    fn tuple_enumeration_order_and_pruning() {
        let g = star(&[0.5, 0.0, 0.5], &[1.0; 3], 2);
        assert_eq!(
            enumerate_tuples(&g, 0),
            vec![vec![0], vec![2], vec![0, 2], vec![2, 0]]
        );
        assert_eq!(tuple_count(&g), 3 + 6);
    }

    #[test]
    fn subsets_by_size() {
        assert_eq!(
            subsets(3, 1, 2),
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2]
            ]
        );
        assert_eq!(subsets(2, 1, 5).len(), 3);
    }

    #[test]
    fn std_on_half_rom() {
        let g = paper_example("half_rom", Some(0.1)).unwrap();
        let opt = lp_optimum(FormulationKind::Std, &g, DEFAULT_TOL).unwrap();
        assert!((opt - 1.1).abs() < 1e-9);
    }

    #[test]
    fn std_on_stochasticity_gap() {
        let g = paper_example("stochasticity_gap", Some(3.0)).unwrap();
        let opt = lp_optimum(FormulationKind::Std, &g, DEFAULT_TOL).unwrap();
        assert!((opt - 3.0).abs() < 1e-9);
    }

    #[test]
    fn new_and_dual_agree() {
        for seed in 0..10 {
            let g = random_graph(&RandomGraphConfig::default(), seed);
            let primal = lp_optimum(FormulationKind::New, &g, DEFAULT_TOL).unwrap();
            let dual = lp_optimum(FormulationKind::NewDual, &g, DEFAULT_TOL).unwrap();
            assert!(
                (primal - dual).abs() <= 1e-8 * (1.0 + primal),
                "{primal} vs {dual}"
            );
        }
    }

    #[test]
    fn input_kind_mismatch() {
        let g = paper_example("order_gap", None).unwrap();
        assert!(matches!(
            build_formulation(FormulationKind::NewIid, &g, None),
            Err(Error::InstanceMismatch { .. })
        ));
        assert!(matches!(
            build_formulation(FormulationKind::Dp, &g, None),
            Err(Error::MissingOracle)
        ));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let g = paper_example("stochasticity_gap", Some(4.0)).unwrap();
        let err = build_formulation_with_cap(FormulationKind::New, &g, None, 10).unwrap_err();
        assert!(matches!(err, Error::CapExceeded(_)));
    }

    #[test]
    fn rel_refuses_large_inputs() {
        let g = paper_example("stochasticity_gap", Some(7.0)).unwrap();
        assert!(matches!(
            build_formulation(FormulationKind::Rel, &g, None),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn edge_vars_examples() {
        let g = star(&[0.5, 0.5], &[1.0, 1.0], 2);
        let single = [TupleColumn {
            online_vertex: 0,
            tuple: vec![0],
            value: 0.4,
        }];
        let x = edge_vars_from_solution(&g, &single, None, 1e-9).unwrap();
        assert!((x.get(0, 0) - 0.4).abs() < 1e-15);
        let pair = [TupleColumn {
            online_vertex: 0,
            tuple: vec![0, 1],
            value: 1.0,
        }];
        let x = edge_vars_from_solution(&g, &pair, None, 1e-9).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((x.get(1, 0) - 0.5).abs() < 1e-15);
        let zero = edge_vars_from_solution(&g, &[], None, 1e-9).unwrap();
        assert!(zero.to_matrix().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn edge_vars_reject_infeasible_columns() {
        let g = star(&[0.5, 0.5], &[1.0, 1.0], 2);
        let over = [
            TupleColumn {
                online_vertex: 0,
                tuple: vec![0],
                value: 0.7,
            },
            TupleColumn {
                online_vertex: 0,
                tuple: vec![1],
                value: 0.7,
            },
        ];
        assert!(matches!(
            edge_vars_from_solution(&g, &over, None, 1e-9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn contributions_examples() {
        let g = star(&[0.5], &[2.0], 1);
        let x = edge_vars_from_solution(
            &g,
            &[TupleColumn {
                online_vertex: 0,
                tuple: vec![0],
                value: 1.0,
            }],
            None,
            1e-9,
        )
        .unwrap();
        assert!((contributions(&g, &x).values[0] - 1.0).abs() < 1e-15);
        let zero = EdgeVariables::zeros(1, 1);
        assert_eq!(contributions(&g, &zero).values, vec![0.0]);
    }

    #[test]
    fn contributions_sum_to_optimum() {
        for seed in 0..10 {
            let g = random_graph(&RandomGraphConfig::default(), seed);
            let f = build_formulation(FormulationKind::New, &g, None).unwrap();
            let sol = f.solve(DEFAULT_TOL).unwrap();
            let cols = f.tuple_columns(&sol.lp);
            let x = edge_vars_from_solution(&g, &cols, None, 1e-7).unwrap();
            let c = contributions(&g, &x);
            assert!((c.total() - sol.objective).abs() < 1e-8);
            for u in 0..g.offline_count() {
                let load: f64 = (0..g.online_count()).map(|v| g.p(u, v) * x.get(u, v)).sum();
                assert!(load <= 1.0 + 1e-7);
            }
        }
    }

    #[test]
    fn kind_parsing() {
        for kind in FormulationKind::ALL {
            assert_eq!(kind.as_str().parse::<FormulationKind>().unwrap(), kind);
        }
        assert_eq!(
            "new-iid".parse::<FormulationKind>().unwrap(),
            FormulationKind::NewIid
        );
        assert!("bogus".parse::<FormulationKind>().is_err());
    }
}
