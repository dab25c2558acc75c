//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs with `cargo test --test acceptance`. Failing criteria are reported but do not fail
//! the run unless `LACE_ACCEPTANCE_STRICT=1` is set.

mod common;

use std::time::{Duration, Instant};

use lace_core::counterfactual::{interpolate, interpolate_raw, t_for_average_rate};
use lace_core::decoder::{
    logical_error_rate_with, sample_error, BruteForceDecoder, Decoder, DecoderConfig, MpsDecoder, PauliPrior,
};
use lace_core::estimate::{bootstrap, empirical_dists, fit_decays, point_estimate, qubit_error_rates, LearnedChannel};
use lace_core::models::{self, FactorGraph, FitOptions, MarginalOracle, ModelKind};
use lace_core::prob::{wht_forward, wht_inverse, xor_convolve, xor_convolve_raw};
use lace_core::protocol::{ExperimentPlan, Protocol, ShotArchive};
use lace_core::rng::stream;
use lace_core::sim::{NoiseConfig, Simulator, Spam};
use lace_core::surface::{stabilizer_prep_round, verify_two_round_identity, CodeLayout};
use lace_core::{synthetic, ProbDist, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_dist(n: usize, rng: &mut ChaCha8Rng) -> ProbDist {
    ProbDist::from_weights(n, (0..1 << n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" / ")
}

fn layout_4x5() -> CodeLayout {
    CodeLayout::new(4, 5).unwrap()
}

fn simulate(truth: &ProbDist, spam: Option<Spam>, plan: &ExperimentPlan) -> Result<ShotArchive> {
    let protocol = Protocol::new(layout_4x5());
    let mut noise = NoiseConfig::effective(truth.clone());
    if let Some(spam) = spam {
        noise = noise.with_spam(spam);
    }
    Simulator::new(&protocol, &noise)?.run_plan(plan)
}

fn learn(archive: &ShotArchive) -> Result<LearnedChannel> {
    let sites: Vec<usize> = (0..archive.n_data).collect();
    fit_decays(&empirical_dists(archive, &sites)?)
}

fn two_round_identity() -> Result<Outcome> {
    let mut failed = vec![];
    for rows in 2..=6 {
        for cols in 2..=6 {
            let layout = CodeLayout::new(rows, cols)?;
            if !verify_two_round_identity(&layout, &stabilizer_prep_round(&layout)) {
                failed.push(format!("{rows}x{cols}"));
            }
        }
    }
    Ok(Outcome { pass: failed.is_empty(), detail: format!("25 layouts, failures {failed:?}") })
}

fn transforms() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_dist(20, &mut rng);
    let round_trip = max_abs_diff(&wht_inverse(&wht_forward(&p)?)?, p.values());
    let (a, b) = (random_dist(12, &mut rng), random_dist(12, &mut rng));
    let product: Vec<f64> =
        wht_forward(&a)?.values().iter().zip(wht_forward(&b)?.values()).map(|(x, y)| x * y).collect();
    let convolution = max_abs_diff(wht_forward(&xor_convolve(&a, &b)?)?.values(), &product);
    let c = ProbDist::product(&(0..12).map(|k| 0.01 + 0.01 * k as f64).collect::<Vec<_>>())?;
    let (doubled, _) = interpolate_raw(&wht_forward(&c)?, 2.0)?;
    let squared = xor_convolve_raw(c.values(), c.values())?;
    let power = max_abs_diff(&doubled, &squared);
    Ok(Outcome {
        pass: round_trip <= 1e-12 && convolution <= 1e-12 && power <= 1e-10,
        detail: format!("round trip {round_trip:.1e}, convolution {convolution:.1e}, t=2 power {power:.1e}"),
    })
}

fn estimator_recovery() -> Result<Outcome> {
    let truth = synthetic::paper_like(&layout_4x5())?;
    let plan = ExperimentPlan::desk_scale(11);
    let clean = simulate(&truth, None, &plan)?;
    let channel = learn(&clean)?;
    let rate_error = max_abs_diff(&qubit_error_rates(&channel, false)?, &truth.site_rates());
    let tvd = channel.distribution.tvd(&truth)?;

    let n_qubits = Protocol::new(layout_4x5()).n_qubits();
    let noisy = simulate(&truth, Some(Spam::uniform(n_qubits, 0.0, 0.02)), &plan)?;
    let spread = bootstrap(&clean, "qubit_decays", 200, 12)?;
    let shifted = point_estimate(&noisy, "qubit_decays")?;
    let within =
        spread.point.iter().zip(&shifted).zip(spread.half_widths()).filter(|((a, b), h)| (*a - *b).abs() <= *h).count();
    let n = spread.point.len();
    Ok(Outcome {
        pass: rate_error <= 0.005 && tvd <= 0.02 && within == n,
        detail: format!(
            "max rate error {rate_error:.4} (<= 0.005), TVD {tvd:.4} (<= 0.02), decays within 2 sigma under 2% measurement flips {within}/{n}"
        ),
    })
}

fn precision_scaling() -> Result<Outcome> {
    let truth = synthetic::paper_like(&layout_4x5())?;
    let archive = simulate(&truth, None, &ExperimentPlan::paper_scale(21))?;
    let boot = bootstrap(&archive, "qubit_rates", 200, 22)?;
    let worst = boot.relative_half_widths().into_iter().fold(0.0, f64::max);
    Ok(Outcome {
        pass: worst <= 0.005,
        detail: format!("{} sequences, worst relative 2 sigma half-width {:.3}%", archive.records.len(), 100.0 * worst),
    })
}

fn hammersley_clifford() -> Result<Outcome> {
    let shapes = [(2, 3), (3, 3), (3, 4), (2, 5)];
    let mut worst = 0.0f64;
    for kind in [ModelKind::Iid, ModelKind::Ind, ModelKind::Ising, ModelKind::Cg1d] {
        for k in 0..100u64 {
            let (rows, cols) = shapes[k as usize % shapes.len()];
            let graph = FactorGraph::build(kind, &CodeLayout::new(rows, cols)?)?;
            let truth = common::random_in_model(&graph, &mut ChaCha8Rng::seed_from_u64(1000 + k));
            let fit = models::estimate_couplings(&graph, &MarginalOracle::new(&truth)?, &FitOptions::default())?;
            worst = worst.max(fit.dist()?.tvd(&truth)?);
        }
    }
    Ok(Outcome { pass: worst <= 1e-9, detail: format!("400 in-model distributions, worst TVD {worst:.1e}") })
}

fn metric_ordering() -> Result<Outcome> {
    let layout = layout_4x5();
    let truth = synthetic::correlated_reference(&layout)?;
    let oracle = MarginalOracle::new(&truth)?;
    let mut jsd = vec![];
    let mut cov = vec![];
    for kind in [ModelKind::Iid, ModelKind::Ind, ModelKind::Ising, ModelKind::Cg1d] {
        let model =
            models::estimate_couplings(&FactorGraph::build(kind, &layout)?, &oracle, &FitOptions::default())?.dist()?;
        jsd.push(models::jsd(&truth, &model)?);
        cov.push(models::cov_diff_norm(&truth, &model)?);
    }
    let ordered = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    Ok(Outcome {
        pass: ordered(&jsd) && ordered(&cov),
        detail: format!("JSD {}, covariance norm {} (IID, IND, Ising, CG1D)", sci(&jsd), sci(&cov)),
    })
}

fn covariance_bound() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=8);
        let (p, q) = (random_dist(n, &mut rng), random_dist(n, &mut rng));
        if !models::cov_bound_check(p.values(), q.values(), &models::indicator_embedding(n))?.holds {
            violations += 1;
        }
    }
    let (a, d) = (0.1, 1.0);
    let tight = models::cov_bound_check(&[1.0, 0.0], &[1.0 - a, a], &[vec![0.0], vec![d]])?;
    let tight_err =
        (tight.lhs - d * d * a * (1.0 - a)).abs().max((tight.rhs - a * (d * d - a * a * d * d / 4.0)).abs());
    let (hp, hq) = models::hadamard_counterexample(2)?;
    let (h_cov, h_tvd) = (models::cov_diff_norm(&hp, &hq)?, hp.tvd(&hq)?);
    Ok(Outcome {
        pass: violations == 0 && tight_err <= 1e-12 && h_cov <= 1e-12 && (h_tvd - 0.5).abs() <= 1e-12,
        detail: format!(
            "violations {violations}/10000, tightness error {tight_err:.1e}, Hadamard pair covariance gap {h_cov:.1e} with TVD {h_tvd}"
        ),
    })
}

fn decoder_equivalence() -> Result<Outcome> {
    let layout = CodeLayout::new(3, 3)?;
    let prior = PauliPrior::depolarizing(9, 0.1)?;
    let exact = BruteForceDecoder::new(&layout, prior.clone())?;
    let full = MpsDecoder::new(&layout, prior.clone(), 1 << layout.rows)?;
    let mut exhaustive = 0;
    for s in 0..1u64 << layout.n_ancillas() {
        if exact.decode(s)?.class == full.decode(s)?.class {
            exhaustive += 1;
        }
    }
    let truncated = MpsDecoder::new(&layout, prior, 8)?;
    let sampler = ProbDist::product(&[0.1; 9])?.sampler()?;
    let mut rng = stream(31, &[0]);
    let mut sampled = 0;
    for _ in 0..1000 {
        let (x, z) = sample_error(&sampler, &mut rng);
        let s = layout.syndrome_masks(x, z);
        if exact.decode(s)?.class == truncated.decode(s)?.class {
            sampled += 1;
        }
    }
    Ok(Outcome {
        pass: exhaustive == 256 && sampled >= 990,
        detail: format!("exact bond dimension {exhaustive}/256 syndromes, chi 8 {sampled}/1000 sampled syndromes"),
    })
}

fn logical_sanity() -> Result<Outcome> {
    let rate = |d: usize| -> Result<_> {
        let layout = CodeLayout::new(d, d)?;
        let source = ProbDist::product(&vec![0.05; d * d])?;
        logical_error_rate_with(&layout, &source, &DecoderConfig::Mps { chi: 8 }, 10_000, 10, 41)
    };
    let (d3, d5) = (rate(3)?, rate(5)?);
    let gap = 2.0 * d3.sigma.hypot(d5.sigma);
    Ok(Outcome {
        pass: d3.rate - d5.rate > gap,
        detail: format!("d=3 {:.5} +/- {:.5}, d=5 {:.5} +/- {:.5} (chi 8)", d3.rate, d3.sigma, d5.rate, d5.sigma),
    })
}

fn model_divergence() -> Result<Outcome> {
    let layout = layout_4x5();
    let eigen = wht_forward(&synthetic::correlated_reference(&layout)?)?;
    let t_low = t_for_average_rate(&eigen, 0.03)?;
    let kinds = [ModelKind::Iid, ModelKind::Ind, ModelKind::Ising, ModelKind::Cg1d];
    let mut table = vec![];
    for t in [1.0, t_low] {
        let full = interpolate(&eigen, t)?.distribution;
        let oracle = MarginalOracle::new(&full)?;
        let mut sources = vec![full.clone()];
        for kind in kinds {
            sources.push(
                models::estimate_couplings(&FactorGraph::build(kind, &layout)?, &oracle, &FitOptions::default())?
                    .dist()?,
            );
        }
        let rates = sources
            .iter()
            .map(|s| logical_error_rate_with(&layout, s, &DecoderConfig::Table, 10_000, 10, 51))
            .collect::<Result<Vec<_>>>()?;
        table.push(rates);
    }
    let close = |a: &lace_core::decoder::LogicalRate, b: &lace_core::decoder::LogicalRate| {
        (a.rate - b.rate).abs() <= 2.0 * a.sigma.hypot(b.sigma)
    };
    let below = |m: &lace_core::decoder::LogicalRate, f: &lace_core::decoder::LogicalRate| {
        f.rate - m.rate > 2.0 * m.sigma.hypot(f.sigma)
    };
    let (hi, lo) = (&table[0], &table[1]);
    let agree_at_one = hi[1..].iter().all(|m| close(m, &hi[0]));
    let iid_ind_low = below(&lo[1], &lo[0]) && below(&lo[2], &lo[0]);
    let cg1d_overlaps = close(&lo[4], &lo[0]);
    let ising_pessimistic = lo[3].rate >= lo[0].rate;
    let fmt = |row: &[lace_core::decoder::LogicalRate]| {
        ["full", "IID", "IND", "Ising", "CG1D"]
            .iter()
            .zip(row)
            .map(|(name, r)| format!("{name} {:.5}+/-{:.5}", r.rate, r.sigma))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(Outcome {
        pass: agree_at_one && iid_ind_low && cg1d_overlaps && ising_pessimistic,
        detail: format!(
            "t=1 [{}] agree {agree_at_one}; t={t_low:.4} [{}] IID/IND below {iid_ind_low}, CG1D overlaps {cg1d_overlaps}, Ising >= full {ising_pessimistic}",
            fmt(hi),
            fmt(lo)
        ),
    })
}

fn blanket_recovery() -> Result<Outcome> {
    let layout = layout_4x5();
    let oracle = MarginalOracle::new(&synthetic::paper_like(&layout)?)?;
    let mut recovered = 0;
    for q in 0..layout.n_data() {
        let mut truth = layout.data_neighbors(q);
        truth.sort_unstable();
        if models::blanket_search(&oracle, q, truth.len())?.subset == truth {
            recovered += 1;
        }
    }
    Ok(Outcome {
        pass: recovered * 10 >= 9 * layout.n_data(),
        detail: format!("{recovered}/{} neighborhoods", layout.n_data()),
    })
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let checks: [(&str, Check, Duration); 11] = [
        ("two-round identity", two_round_identity, Duration::from_secs(1)),
        ("transform correctness", transforms, Duration::from_secs(10)),
        ("estimator recovery", estimator_recovery, Duration::from_secs(600)),
        ("precision scaling", precision_scaling, Duration::from_secs(1800)),
        ("Hammersley-Clifford round trip", hammersley_clifford, Duration::from_secs(120)),
        ("metric ordering", metric_ordering, Duration::from_secs(300)),
        ("covariance bound", covariance_bound, Duration::from_secs(60)),
        ("decoder oracle equivalence", decoder_equivalence, Duration::from_secs(300)),
        ("logical-rate sanity", logical_sanity, Duration::from_secs(600)),
        ("model divergence", model_divergence, Duration::from_secs(3600)),
        ("blanket search", blanket_recovery, Duration::from_secs(600)),
    ];
    let mut passed = 0;
    for (k, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= *budget;
        passed += pass as usize;
        println!(
            "[{}] {:>2} {name}: {} ({:.1} s of {} s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {passed}/{} criteria passed", checks.len());
    if passed < checks.len() && std::env::var("LACE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
