use rand::Rng;
use stochmatch::formulations::TupleColumn;
use stochmatch::graph::WeightMode;
use stochmatch::probing::{LazyStates, VertexPlan};
use stochmatch::rng::seeded;
use stochmatch::StochasticGraph;

fn star() -> StochasticGraph {
    StochasticGraph::from_matrices(
        &[vec![0.3], vec![0.6], vec![0.9]],
        &[vec![1.0], vec![2.0], vec![3.0]],
        vec![3],
        WeightMode::EdgeWeighted,
    )
    .unwrap()
}

fn col(tuple: &[usize], value: f64) -> TupleColumn {
    TupleColumn {
        online_vertex: 0,
        tuple: tuple.to_vec(),
        value,
    }
}

/// Upper 0.999 quantile of chi-square with `k` degrees of freedom
/// (Wilson–Hilferty).
fn chi2_critical(k: usize) -> f64 {
    let k = k as f64;
    let z = 3.090_232;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

#[test]
fn tuple_choice_frequencies() {
    let g = star();
    let cols = [col(&[2, 0], 0.25), col(&[1], 0.15), col(&[0, 1, 2], 0.4)];
    let plan = VertexPlan::new(&g, 0, &cols).unwrap();
    assert!((plan.mass() - 0.8).abs() < 1e-12);
    let trials = 200_000;
    let mut counts = [0usize; 4];
    let mut rng = seeded(77);
    for s in 0..trials {
        let mut states = LazyStates::new(&g, s);
        let t = plan.probe(&mut states, &mut rng);
        let k = match t.chosen_tuple.as_deref() {
            Some([2, 0]) => 0,
            Some([1]) => 1,
            Some([0, 1, 2]) => 2,
            None => 3,
            Some(other) => panic!("unexpected tuple {other:?}"),
        };
        counts[k] += 1;
    }
    let probs = [0.25, 0.15, 0.4, 0.2];
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| {
            let e = p * trials as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < chi2_critical(3), "chi2 = {chi2}");
}

#[test]
fn commit_distribution_of_one_tuple() {
    // Tuple (0, 1, 2): first active edge wins.
    let g = star();
    let plan = VertexPlan::new(&g, 0, &[col(&[0, 1, 2], 1.0)]).unwrap();
    let trials = 200_000;
    let mut counts = [0usize; 4];
    let mut rng = seeded(3);
    for _ in 0..trials {
        let mut states = LazyStates::new(&g, rng.gen());
        let t = plan.probe(&mut states, &mut rng);
        counts[t.committed.unwrap_or(3)] += 1;
        assert_eq!(
            t.probes.last().map(|&(_, s)| s).unwrap_or(false),
            t.committed.is_some()
        );
    }
    let probs = [0.3, 0.7 * 0.6, 0.7 * 0.4 * 0.9, 0.7 * 0.4 * 0.1];
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| {
            let e = p * trials as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < chi2_critical(3), "chi2 = {chi2}");
}

#[test]
fn probes_stop_at_first_active_and_respect_patience() {
    let g = star();
    let plan = VertexPlan::new(&g, 0, &[col(&[2, 1, 0], 0.5), col(&[0], 0.5)]).unwrap();
    let mut rng = seeded(12);
    for s in 0..5_000 {
        let mut states = LazyStates::new(&g, s);
        let t = plan.probe(&mut states, &mut rng);
        assert!(t.probes.len() <= g.patience(0));
        let first_active = t.probes.iter().position(|&(_, active)| active);
        if let Some(i) = first_active {
            assert_eq!(i, t.probes.len() - 1);
            assert_eq!(t.committed, Some(t.probes[i].0));
        }
        let tuple = t.chosen_tuple.expect("mass is one");
        for (&(u, _), &expected) in t.probes.iter().zip(&tuple) {
            assert_eq!(u, expected);
        }
    }
}
