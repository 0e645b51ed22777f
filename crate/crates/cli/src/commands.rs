use std::io::{self, Write};

use anyhow::{bail, Context, Result};
use rand::Rng;
use stochmatch::algorithms::{
    run_unknown_rom_with, solve_tuple_lp, ArrivalModel, KnownGraphAlgorithm, KnownIidAlgorithm,
    Variant,
};
use stochmatch::benchmarks::{
    opt_committal_exact, opt_committal_iid_mc, opt_noncommittal_exact, opt_online_fixed_order,
    order_gap, BenchmarkLimits,
};
use stochmatch::formulations::{
    lp_optimum, tuple_count, FormulationInput, FormulationKind, DEFAULT_ENUM_CAP, DP_MAX_OFFLINE,
    REL_MAX_OFFLINE, REL_MAX_PATIENCE,
};
use stochmatch::graph::{paper_example, random_graph, Instance, RandomGraphConfig};
use stochmatch::probing::LazyStates;
use stochmatch::rng::{mix, seeded};
use stochmatch::simulate::{estimate_value, SimConfig, SimReport};
use stochmatch::StochasticGraph;

use crate::report::{write_csv, write_json, Check, Format, Row};
use crate::{Algorithm, BenchQuantity, Common, ExampleName, Family, Source};

#[derive(Default)]
pub struct Output {
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
}

impl Output {
    pub fn emit(&self, format: Format) -> io::Result<()> {
        let stdout = io::stdout();
        let mut out = stdout.lock();
        match format {
            Format::Csv => write_csv(&mut out, &self.rows)?,
            Format::Json => write_json(&mut out, &self.rows, &self.checks)?,
        }
        out.flush()
    }

    fn exact(&mut self, instance: &str, quantity: &str, value: f64) {
        self.rows.push(Row::exact(instance, quantity, value));
    }

    fn estimate(&mut self, instance: &str, quantity: &str, report: SimReport) {
        self.rows.push(Row::estimate(instance, quantity, report));
    }

    /// Records `value` and checks it against `expected` within `tol`.
    fn expect(&mut self, instance: &str, quantity: &str, value: f64, expected: f64, tol: f64) {
        self.exact(instance, quantity, value);
        self.checks.push(Check {
            instance: instance.into(),
            quantity: quantity.into(),
            expected: format!("{expected} ± {tol:e}"),
            observed: value,
            pass: (value - expected).abs() <= tol,
        });
    }
}

fn sim_config(common: &Common) -> SimConfig {
    SimConfig::new(common.trials, common.seed).with_parallelism(common.parallelism)
}

fn example_label(name: &str, param: Option<f64>) -> String {
    let key = name.replace('-', "_");
    match param {
        Some(x) => format!("{key}({x})"),
        None => key,
    }
}

fn load(source: &Source) -> Result<(String, Instance)> {
    match (&source.input, &source.example) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let name = path
                .file_stem()
                .map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned());
            Ok((name, Instance::from_json(&text)?))
        }
        (None, Some(name)) => {
            let graph = paper_example(name, source.param)?;
            Ok((example_label(name, source.param), Instance::Graph(graph)))
        }
        (None, None) => bail!("give an instance file or --example"),
        (Some(_), Some(_)) => bail!("give either an instance file or --example, not both"),
    }
}

fn lp_value<'a>(
    common: &Common,
    kind: FormulationKind,
    input: impl Into<FormulationInput<'a>>,
) -> Result<f64> {
    let input = input.into();
    Ok(match kind {
        FormulationKind::New | FormulationKind::NewIid => {
            solve_tuple_lp(input, kind, common.lp_mode, common.tol)?.objective
        }
        _ => lp_optimum(kind, input, common.tol)?,
    })
}

fn default_kinds(graph: &StochasticGraph) -> Vec<FormulationKind> {
    use FormulationKind::*;
    let mut kinds = vec![Std, New];
    if tuple_count(graph) <= DEFAULT_ENUM_CAP {
        kinds.push(NewDual);
    }
    kinds.push(StdNon);
    let max_patience = graph.patience_values().iter().copied().max().unwrap_or(0);
    if graph.offline_count() <= REL_MAX_OFFLINE && max_patience <= REL_MAX_PATIENCE {
        kinds.push(Rel);
    }
    if graph.offline_count() <= DP_MAX_OFFLINE {
        kinds.push(Dp);
    }
    kinds
}

pub fn solve(common: &Common, source: &Source, kinds: &[FormulationKind]) -> Result<Output> {
    let (name, instance) = load(source)?;
    let kinds = match (&instance, kinds.is_empty()) {
        (_, false) => kinds.to_vec(),
        (Instance::Graph(g), true) => default_kinds(g),
        (Instance::Iid(_), true) => vec![FormulationKind::StdIid, FormulationKind::NewIid],
    };
    let mut out = Output::default();
    for kind in kinds {
        let value = lp_value(common, kind, &instance)?;
        out.exact(&name, &format!("lp_{kind}"), value);
    }
    Ok(out)
}

pub fn bench(
    common: &Common,
    source: &Source,
    quantities: &[BenchQuantity],
    wide: bool,
) -> Result<Output> {
    let (name, instance) = load(source)?;
    let limits = if wide {
        BenchmarkLimits::wide()
    } else {
        BenchmarkLimits::default()
    };
    let mut out = Output::default();
    match &instance {
        Instance::Graph(g) => {
            let all = [
                BenchQuantity::Committal,
                BenchQuantity::Noncommittal,
                BenchQuantity::OrderGap,
            ];
            let quantities = if quantities.is_empty() {
                &all[..]
            } else {
                quantities
            };
            for q in quantities {
                match q {
                    BenchQuantity::Committal => {
                        out.exact(&name, "opt_committal", opt_committal_exact(g, &limits)?)
                    }
                    BenchQuantity::Noncommittal => out.exact(
                        &name,
                        "opt_noncommittal",
                        opt_noncommittal_exact(g, &limits)?,
                    ),
                    BenchQuantity::OrderGap => {
                        let gap = order_gap(g, &limits)?;
                        out.exact(&name, "opt_order_worst", gap.worst);
                        out.exact(&name, "opt_order_best", gap.best);
                        out.exact(&name, "order_gap", gap.ratio);
                    }
                }
            }
        }
        Instance::Iid(inst) => {
            if quantities.iter().any(|&q| q != BenchQuantity::Committal) {
                bail!("only the committal benchmark is available for i.i.d. instances");
            }
            let report = opt_committal_iid_mc(inst, &sim_config(common), &limits)?;
            out.estimate(&name, "opt_committal", report);
        }
    }
    Ok(out)
}

/// Expected-value guarantee of the unknown-graph ROM algorithm for finite
/// `n`, as a fraction of the LP-new optimum.
pub fn finite_rom_bound(n: usize, alpha: f64) -> f64 {
    let first = ((alpha * n as f64).ceil() as usize).max(2);
    (first..=n).map(|t| alpha / (t - 1) as f64).sum()
}

fn simulate_graph(
    common: &Common,
    graph: &StochasticGraph,
    algorithm: Algorithm,
    order: Option<Vec<usize>>,
) -> Result<SimReport> {
    let config = sim_config(common);
    let report = match algorithm {
        Algorithm::Plain | Algorithm::Modified => {
            let alg = KnownGraphAlgorithm::new(graph, common.lp_mode, common.tol)?;
            let (arrival, variant) = match (algorithm, order) {
                (Algorithm::Modified, Some(_)) => {
                    bail!("the modified algorithm runs in random order; drop --order")
                }
                (Algorithm::Modified, None) => (ArrivalModel::Rom, Variant::Modified),
                (_, Some(order)) => (ArrivalModel::Adversarial(order), Variant::Plain),
                (_, None) => (ArrivalModel::Rom, Variant::Plain),
            };
            estimate_value(
                |seed, _| {
                    let mut rng = seeded(seed);
                    let mut states = LazyStates::new(graph, rng.gen());
                    Ok(alg.run(&arrival, variant, &mut rng, &mut states)?.value)
                },
                &config,
            )?
        }
        Algorithm::UnknownRom => estimate_value(
            |seed, _| {
                let mut rng = seeded(seed);
                let order = match &order {
                    Some(order) => order.clone(),
                    None => {
                        let mut o: Vec<usize> = (0..graph.online_count()).collect();
                        rand::seq::SliceRandom::shuffle(&mut o[..], &mut rng);
                        o
                    }
                };
                let mut states = LazyStates::new(graph, rng.gen());
                let run = run_unknown_rom_with(
                    graph,
                    &order,
                    common.alpha,
                    common.lp_mode,
                    &mut rng,
                    &mut states,
                )?;
                Ok(run.value)
            },
            &config,
        )?,
        Algorithm::Iid => bail!("the i.i.d. algorithm needs a type graph with rates and horizon"),
    };
    Ok(report)
}

pub fn simulate(
    common: &Common,
    source: &Source,
    algorithm: Algorithm,
    order: Option<Vec<usize>>,
) -> Result<Output> {
    let (name, instance) = load(source)?;
    let mut out = Output::default();
    match &instance {
        Instance::Graph(g) => {
            let report = simulate_graph(common, g, algorithm, order)?;
            let lp = lp_value(common, FormulationKind::New, g)?;
            let mean = report.mean;
            out.estimate(&name, "value", report);
            out.exact(&name, "lp_new", lp);
            out.exact(&name, "ratio", mean / lp);
            if algorithm == Algorithm::UnknownRom {
                out.exact(
                    &name,
                    "finite_n_bound",
                    finite_rom_bound(g.online_count(), common.alpha),
                );
            }
        }
        Instance::Iid(inst) => {
            if !matches!(algorithm, Algorithm::Iid | Algorithm::Plain) || order.is_some() {
                bail!("i.i.d. instances run the i.i.d. algorithm only");
            }
            let alg = KnownIidAlgorithm::new(inst, common.lp_mode, common.tol)?;
            let report = estimate_value(
                |seed, _| Ok(alg.run(&mut seeded(seed))?.value),
                &sim_config(common),
            )?;
            let lp = alg.solution().objective;
            let mean = report.mean;
            out.estimate(&name, "value", report);
            out.exact(&name, "lp_new_iid", lp);
            out.exact(&name, "ratio", mean / lp);
        }
    }
    Ok(out)
}

const EXACT_TOL: f64 = 1e-9;

fn example_order_gap(out: &mut Output) -> Result<()> {
    let g = paper_example("order_gap", None)?;
    let limits = BenchmarkLimits::default();
    let a = opt_online_fixed_order(&g, &[0, 1], &limits)?;
    let b = opt_online_fixed_order(&g, &[1, 0], &limits)?;
    out.expect("order_gap", "opt_order_v1v2", a, 1.0, EXACT_TOL);
    out.expect("order_gap", "opt_order_v2v1", b, 1.25, EXACT_TOL);
    out.expect(
        "order_gap",
        "order_gap",
        order_gap(&g, &limits)?.ratio,
        0.8,
        EXACT_TOL,
    );
    Ok(())
}

fn example_noncommittal_gap(out: &mut Output) -> Result<()> {
    let g = paper_example("noncommittal_gap", None)?;
    let limits = BenchmarkLimits::default();
    let committal = opt_committal_exact(&g, &limits)?;
    let non = opt_noncommittal_exact(&g, &limits)?;
    out.expect(
        "noncommittal_gap",
        "opt_committal",
        committal,
        3.36,
        EXACT_TOL,
    );
    out.expect(
        "noncommittal_gap",
        "opt_noncommittal",
        non,
        3.924,
        EXACT_TOL,
    );
    out.expect("noncommittal_gap", "ratio", committal / non, 0.856269, 1e-6);
    Ok(())
}

fn example_half_rom(common: &Common, out: &mut Output, eps: f64) -> Result<()> {
    let g = paper_example("half_rom", Some(eps))?;
    let label = example_label("half_rom", Some(eps));
    out.expect(
        &label,
        "lp_new",
        lp_value(common, FormulationKind::New, &g)?,
        1.0 + eps,
        1e-7,
    );
    let report = simulate_graph(common, &g, Algorithm::Plain, None)?;
    let predicted = (2.0 * eps + 1.0 + eps - eps * eps) / 2.0;
    let band = 3.0 * report.stderr + 1e-12;
    out.checks.push(Check {
        instance: label.clone(),
        quantity: "rom_value".into(),
        expected: format!("{predicted} ± 3 stderr"),
        observed: report.mean,
        pass: (report.mean - predicted).abs() <= band,
    });
    out.estimate(&label, "rom_value", report);
    out.exact(&label, "predicted_rom_value", predicted);
    Ok(())
}

fn example_single_offline(common: &Common, out: &mut Output, n: usize) -> Result<()> {
    let g = paper_example("single_offline", Some(n as f64))?;
    let label = example_label("single_offline", Some(n as f64));
    let closed = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
    let opt = opt_committal_exact(&g, &BenchmarkLimits::wide())?;
    out.expect(&label, "opt_committal", opt, closed, EXACT_TOL);
    let std = lp_value(common, FormulationKind::Std, &g)?;
    let new = lp_value(common, FormulationKind::New, &g)?;
    out.expect(&label, "lp_std", std, 1.0, 1e-7);
    out.expect(&label, "lp_new_over_lp_std", new / std, 1.0, 1e-7);
    Ok(())
}

fn example_stochasticity_gap(common: &Common, out: &mut Output, n: usize) -> Result<()> {
    let g = paper_example("stochasticity_gap", Some(n as f64))?;
    let label = example_label("stochasticity_gap", Some(n as f64));
    let std = lp_value(common, FormulationKind::Std, &g)?;
    out.expect(&label, "lp_std", std, n as f64, 1e-7);
    let opt = opt_committal_exact(&g, &BenchmarkLimits::wide())?;
    out.exact(&label, "opt_committal", opt);
    let ratio = opt / std;
    out.exact(&label, "opt_over_lp_std", ratio);
    out.checks.push(Check {
        instance: label,
        quantity: "opt_over_lp_std".into(),
        expected: "< 1".into(),
        observed: ratio,
        pass: ratio < 1.0,
    });
    Ok(())
}

fn positive_int(param: Option<f64>, default: usize) -> Result<usize> {
    match param {
        None => Ok(default),
        Some(x) if x >= 1.0 && x.fract() == 0.0 => Ok(x as usize),
        Some(x) => bail!("expected a positive integer, got {x}"),
    }
}

pub fn examples(common: &Common, name: ExampleName, param: Option<f64>) -> Result<Output> {
    let mut out = Output::default();
    if name == ExampleName::All && param.is_some() {
        bail!("--param needs a single example");
    }
    let run = |which: ExampleName| name == ExampleName::All || name == which;
    if run(ExampleName::OrderGap) {
        example_order_gap(&mut out)?;
    }
    if run(ExampleName::NoncommittalGap) {
        example_noncommittal_gap(&mut out)?;
    }
    if run(ExampleName::HalfRom) {
        example_half_rom(common, &mut out, param.unwrap_or(0.1))?;
    }
    if run(ExampleName::SingleOffline) {
        example_single_offline(common, &mut out, positive_int(param, 4)?)?;
    }
    if run(ExampleName::StochasticityGap) {
        example_stochasticity_gap(common, &mut out, positive_int(param, 3)?)?;
    }
    Ok(out)
}

/// Parses `a..b`, `a..=b` (both inclusive) or `a,b,c`.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let sizes: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range {spec}");
        }
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()?
    };
    if sizes.iter().any(|&n| n == 0) {
        bail!("sizes must be positive");
    }
    Ok(sizes)
}

/// Random family used by the unknown-graph sweep: three offline vertices,
/// `n` online vertices, patience up to 2.
pub fn unknown_rom_graph(n: usize, seed: u64) -> StochasticGraph {
    let cfg = RandomGraphConfig {
        offline: 3,
        online: n,
        ..RandomGraphConfig::default()
    };
    random_graph(&cfg, mix(seed, n as u64))
}

pub fn sweep(common: &Common, family: Family, eps: &[f64], n: Option<&str>) -> Result<Output> {
    let mut out = Output::default();
    let default_n = match family {
        Family::SingleOffline => "2..8",
        Family::Gnnp => "2..4",
        Family::UnknownRom => "10,20,30,40",
        Family::HalfRom => "1",
    };
    let sizes = parse_sizes(n.unwrap_or(default_n))?;
    match family {
        Family::HalfRom => {
            for &e in eps {
                let g = paper_example("half_rom", Some(e))?;
                let label = example_label("half_rom", Some(e));
                let lp = lp_value(common, FormulationKind::New, &g)?;
                let report = simulate_graph(common, &g, Algorithm::Plain, None)?;
                let mean = report.mean;
                out.exact(&label, "lp_new", lp);
                out.estimate(&label, "rom_value", report);
                out.exact(&label, "predicted_rom_value", (3.0 * e + 1.0 - e * e) / 2.0);
                out.exact(&label, "ratio", mean / lp);
            }
        }
        Family::SingleOffline => {
            for n in sizes {
                let g = paper_example("single_offline", Some(n as f64))?;
                let label = example_label("single_offline", Some(n as f64));
                let opt = opt_committal_exact(&g, &BenchmarkLimits::wide())?;
                let lp = lp_value(common, FormulationKind::New, &g)?;
                out.exact(&label, "opt_committal", opt);
                out.exact(
                    &label,
                    "closed_form",
                    1.0 - (1.0 - 1.0 / n as f64).powi(n as i32),
                );
                out.exact(&label, "lp_new", lp);
                out.exact(&label, "ratio", opt / lp);
            }
        }
        Family::Gnnp => {
            for n in sizes {
                let g = paper_example("stochasticity_gap", Some(n as f64))?;
                let label = example_label("gnnp", Some(n as f64));
                let std = lp_value(common, FormulationKind::Std, &g)?;
                let new = lp_value(common, FormulationKind::New, &g)?;
                let opt = opt_committal_exact(&g, &BenchmarkLimits::wide())?;
                out.exact(&label, "lp_std", std);
                out.exact(&label, "lp_new", new);
                out.exact(&label, "opt_committal", opt);
                out.exact(&label, "opt_over_lp_std", opt / std);
                out.exact(&label, "opt_over_lp_new", opt / new);
            }
        }
        Family::UnknownRom => {
            for n in sizes {
                let g = unknown_rom_graph(n, common.seed);
                let label = format!("unknown_rom({n})");
                let lp = lp_value(common, FormulationKind::New, &g)?;
                let report = simulate_graph(common, &g, Algorithm::UnknownRom, None)?;
                let mean = report.mean;
                out.exact(&label, "lp_new", lp);
                out.estimate(&label, "value", report);
                out.exact(&label, "ratio", mean / lp);
                out.exact(&label, "finite_n_bound", finite_rom_bound(n, common.alpha));
            }
        }
    }
    Ok(out)
}
