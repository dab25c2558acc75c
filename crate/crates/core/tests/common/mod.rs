//! Random in-model distributions shared by the integration tests.

use lace_core::models::{CouplingSet, FactorGraph, ModelKind, ModelParams, NoiseModel};
use lace_core::ProbDist;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Model with random couplings on every clique of `graph`.
pub fn random_coupling_model(graph: &FactorGraph, rng: &mut ChaCha8Rng) -> NoiseModel {
    let mut set = CouplingSet::default();
    let shared = rng.random_range(1.0..4.0);
    for c in graph.cliques() {
        let j = match (graph.kind, c.count_ones()) {
            (ModelKind::Iid, _) => shared,
            (_, 1) => rng.random_range(1.0..4.0),
            _ => rng.random_range(-1.0..1.0),
        };
        set.couplings.insert(c, j);
    }
    NoiseModel { graph: graph.clone(), params: ModelParams::Couplings(set) }
}

/// Markov chain over the lines of `graph` with random transition tables.
pub fn random_chain(graph: &FactorGraph, rng: &mut ChaCha8Rng) -> ProbDist {
    let n = graph.n;
    let lines = &graph.lines;
    let word =
        |x: u64, line: &[usize]| line.iter().enumerate().fold(0usize, |w, (k, &s)| w | ((x >> s & 1) as usize) << k);
    let mut table = |size: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect()
    };
    let first = table(1 << lines[0].len());
    let transitions: Vec<Vec<Vec<f64>>> =
        lines.windows(2).map(|w| (0..1 << w[0].len()).map(|_| table(1 << w[1].len())).collect()).collect();
    let values = (0..1u64 << n)
        .map(|x| {
            let mut p = first[word(x, &lines[0])];
            for (k, w) in lines.windows(2).enumerate() {
                p *= transitions[k][word(x, &w[0])][word(x, &w[1])];
            }
            p
        })
        .collect();
    ProbDist::new(n, values).unwrap()
}

/// Random distribution inside the family of `graph`.
pub fn random_in_model(graph: &FactorGraph, rng: &mut ChaCha8Rng) -> ProbDist {
    match graph.kind {
        ModelKind::Cg1d => random_chain(graph, rng),
        _ => random_coupling_model(graph, rng).dist().unwrap(),
    }
}
