use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lace_core::counterfactual::{t_for_average_rate, write_weight_csv, ChannelFamily, DEFAULT_T_GRID};
use lace_core::decoder::{logical_error_rate_with, DecoderConfig};
use lace_core::error::ErrorCategory;
use lace_core::estimate::{bootstrap, correlation_matrix, empirical_dists, fit_decays, ESTIMATOR_TAGS};
use lace_core::io::{read_channel, read_family, write_channel, write_family, LayoutShape, ManifestBuilder};
use lace_core::models::{
    estimate_couplings, metric_row, write_metric_csv, FactorGraph, FitOptions, MarginalOracle, ModelKind, NoiseModel,
};
use lace_core::protocol::{ExperimentPlan, Protocol, ShotArchive, PAPER_M_GRID};
use lace_core::sim::{effective_truth, NoiseConfig, Simulator, Spam};
use lace_core::surface::CodeLayout;
use lace_core::synthetic::{correlated_reference, paper_like};
use lace_core::{LaceError, ProbDist, Result};

#[derive(Parser)]
#[command(
    name = "lace",
    version,
    about = "Learn, model and extrapolate locally averaged Pauli noise on surface-code patches"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LACE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Ising field with the reference per-qubit rates.
    PaperLike,
    /// Divisible channel with pair, skip-pair and triple events.
    Correlated,
    /// Gate-level simulation with every rate zero.
    Noiseless,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Write a bundled noise configuration.
    Preset {
        #[arg(long, value_enum)]
        kind: Preset,
        /// Patch shape as ROWSxCOLS.
        #[arg(long, default_value = "4x5")]
        layout: String,
        /// Measurement flip probability added to every qubit.
        #[arg(long, default_value_t = 0.0)]
        meas_flip: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write an experiment plan.
    Plan {
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        /// Comma-separated block counts (overrides the scale's grid).
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        /// Sequences per m (overrides the scale).
        #[arg(long)]
        per_m: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        shots: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a plan under a noise configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "4x5")]
        layout: String,
        /// Overrides the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the shots as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the ground-truth channel (gate-level modes are histogrammed).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        oracle_shots: usize,
    },
    /// Fit the decays of a shot archive and reconstruct the channel.
    Estimate {
        shots: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "4x5")]
        layout: String,
        /// Bootstrap replicates (0 disables).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value = "qubit_rates")]
        tag: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a graphical model to a learned channel.
    FitModel {
        channel: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Effective sample size used for smoothing empty cells.
        #[arg(long, default_value_t = 1e6)]
        pseudo_total: f64,
    },
    /// Compare model families against a channel (JSD, covariance norm, TVD).
    Metrics {
        channel: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "iid,ind,ising,cg1d")]
        kinds: Vec<String>,
        /// Compare against this ground-truth file instead of the channel itself.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build counterfactual lower-noise channels.
    Extrapolate {
        channel: PathBuf,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        /// Also include the t whose average marginal rate equals this value.
        #[arg(long)]
        target_rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Logical error rates of a channel family under each noise model.
    Decode {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "iid,ind,ising,cg1d,full")]
        models: Vec<String>,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// auto, table, brute-force or mps:CHI.
        #[arg(long, default_value = "auto")]
        decoder: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect channel, family and logical-rate results in one JSON document.
    Report {
        channel: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_err(msg: impl Into<String>) -> LaceError {
    LaceError::Config(msg.into())
}

fn parse_layout(s: &str) -> Result<CodeLayout> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| config_err(format!("layout `{s}` is not ROWSxCOLS")))?;
    let rows = r.trim().parse().map_err(|_| config_err(format!("bad row count in `{s}`")))?;
    let cols = c.trim().parse().map_err(|_| config_err(format!("bad column count in `{s}`")))?;
    CodeLayout::new(rows, cols)
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| config_err(format!("{what} needs --seed for reproducible output")))
}

fn args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn channel_layout(header_layout: Option<LayoutShape>, n: usize) -> Result<CodeLayout> {
    let layout = header_layout.ok_or_else(|| config_err("file does not record its layout"))?.build()?;
    if layout.n_data() != n {
        return Err(LaceError::Data(format!("layout has {} data qubits, distribution has {n} sites", layout.n_data())));
    }
    Ok(layout)
}

fn fit_kind(kind: ModelKind, layout: &CodeLayout, source: &MarginalOracle, opts: &FitOptions) -> Result<NoiseModel> {
    estimate_couplings(&FactorGraph::build(kind, layout)?, source, opts)
}

fn parse_decoder(s: &str, layout: &CodeLayout) -> Result<DecoderConfig> {
    match s {
        "auto" => Ok(DecoderConfig::auto(layout, 1 << layout.rows.min(layout.cols))),
        "table" => Ok(DecoderConfig::Table),
        "brute-force" => Ok(DecoderConfig::BruteForce),
        other => {
            let chi = other
                .strip_prefix("mps:")
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| config_err(format!("unknown decoder `{other}`")))?;
            Ok(DecoderConfig::Mps { chi })
        }
    }
}

#[derive(Serialize)]
struct RateRow {
    source: String,
    model: String,
    t: f64,
    avg_physical_rate: f64,
    logical_rate: f64,
    two_sigma: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preset { kind, layout, meas_flip, out } => {
            let layout = parse_layout(&layout)?;
            let mut config = match kind {
                Preset::PaperLike => NoiseConfig::effective(paper_like(&layout)?),
                Preset::Correlated => NoiseConfig::effective(correlated_reference(&layout)?),
                Preset::Noiseless => NoiseConfig::noiseless_gate_level(),
            };
            if meas_flip > 0.0 {
                config = config.with_spam(Spam::uniform(layout.n_qubits(), 0.0, meas_flip));
            }
            config.validate(&Protocol::new(layout))?;
            let mut m = ManifestBuilder::new("preset", args(), None);
            std::fs::write(&out, config.to_json()?)?;
            m.output(&out);
            m.finish(&out)?;
        }
        Command::Plan { scale, m_grid, per_m, shots, seed, out } => {
            let seed = require_seed(seed, "plan")?;
            let plan = match (m_grid, per_m, scale) {
                (None, None, Scale::Desk) => ExperimentPlan { shots, ..ExperimentPlan::desk_scale(seed) },
                (None, None, Scale::Paper) => ExperimentPlan { shots, ..ExperimentPlan::paper_scale(seed) },
                (grid, per_m, scale) => {
                    let grid = grid.unwrap_or_else(|| PAPER_M_GRID.to_vec());
                    let per_m = per_m.unwrap_or(match scale {
                        Scale::Desk => 30,
                        Scale::Paper => 253,
                    });
                    ExperimentPlan::new(grid, per_m, shots, seed)?
                }
            };
            plan.validate()?;
            let mut m = ManifestBuilder::new("plan", args(), Some(seed));
            std::fs::write(&out, plan.to_json()?)?;
            m.output(&out);
            m.finish(&out)?;
        }
        Command::Simulate { config, plan, layout, seed, out, csv, truth, oracle_shots } => {
            let mut m = ManifestBuilder::new("simulate", args(), None);
            m.input(&config)?;
            m.input(&plan)?;
            let layout = parse_layout(&layout)?;
            let protocol = Protocol::new(layout);
            let noise = NoiseConfig::from_json(&read_text(&config)?)?;
            let mut plan = ExperimentPlan::from_json(&read_text(&plan)?)?;
            if let Some(s) = seed {
                plan.master_seed = s;
            }
            let sim = Simulator::new(&protocol, &noise)?;
            let archive = sim.run_plan(&plan)?;
            let mut w = BufWriter::new(File::create(&out)?);
            archive.write_binary(&mut w)?;
            w.flush()?;
            m.output(&out);
            if let Some(path) = csv {
                archive.write_csv(BufWriter::new(File::create(&path)?))?;
                m.output(&path);
            }
            if let Some(path) = truth {
                let gt = effective_truth(&protocol, &noise, oracle_shots, plan.master_seed)?;
                lace_core::io::write_dist(&path, &gt.distribution)?;
                m.output(&path);
            }
            m.seed(plan.master_seed);
            m.finish(&out)?;
        }
        Command::Estimate { shots, out, layout, bootstrap: replicates, tag, seed } => {
            let mut m = ManifestBuilder::new("estimate", args(), seed);
            m.input(&shots)?;
            let layout = parse_layout(&layout)?;
            let archive = ShotArchive::read_binary(BufReader::new(File::open(&shots)?))?;
            if archive.n_data != layout.n_data() {
                return Err(config_err(format!(
                    "archive has {} data qubits, layout {}",
                    archive.n_data,
                    layout.n_data()
                )));
            }
            let sites: Vec<usize> = (0..archive.n_data).collect();
            let channel = fit_decays(&empirical_dists(&archive, &sites)?)?;
            m.outputs(&write_channel(&out, &channel, Some(&layout))?);
            let corr = sibling(&out, "correlations.csv");
            correlation_matrix(&channel.distribution)?.write_csv(BufWriter::new(File::create(&corr)?))?;
            m.output(&corr);
            if replicates > 0 {
                if !ESTIMATOR_TAGS.contains(&tag.as_str()) {
                    return Err(LaceError::UnknownEstimator(tag));
                }
                let seed = require_seed(seed, "bootstrap")?;
                let result = bootstrap(&archive, &tag, replicates, seed)?;
                let path = sibling(&out, "bootstrap.json");
                write_json(&path, &result)?;
                m.output(&path);
            }
            m.finish(&out)?;
        }
        Command::FitModel { channel, kind, out, pseudo_total } => {
            let mut m = ManifestBuilder::new("fit-model", args(), None);
            m.input(&channel)?;
            let data = read_channel(&channel)?;
            let layout = channel_layout(data.header.layout, data.distribution.num_sites())?;
            let kind: ModelKind = kind.parse()?;
            let oracle = MarginalOracle::from_eigenvalues(lace_core::prob::wht_forward(&data.distribution)?);
            let model = fit_kind(kind, &layout, &oracle, &FitOptions { pseudo_total })?;
            let out = out.unwrap_or_else(|| sibling(&channel, &format!("{kind}.json")));
            std::fs::write(&out, model.to_json()?)?;
            println!("{kind}: {} parameters -> {}", model.graph.parameter_count(), out.display());
            m.output(&out);
            m.finish(&out)?;
        }
        Command::Metrics { channel, kinds, reference, out } => {
            let mut m = ManifestBuilder::new("metrics", args(), None);
            m.input(&channel)?;
            let data = read_channel(&channel)?;
            let layout = channel_layout(data.header.layout, data.distribution.num_sites())?;
            let target = match &reference {
                Some(path) => {
                    m.input(path)?;
                    lace_core::io::read_dist(path)?
                }
                None => data.distribution.clone(),
            };
            let oracle = MarginalOracle::new(&data.distribution)?;
            let mut rows = Vec::new();
            for k in &kinds {
                let kind: ModelKind = k.parse()?;
                let model = fit_kind(kind, &layout, &oracle, &FitOptions::default())?;
                rows.push(metric_row(&kind.to_string(), model.graph.parameter_count(), &target, &model.dist()?)?);
            }
            write_metric_csv(&rows, BufWriter::new(File::create(&out)?))?;
            m.output(&out);
            m.finish(&out)?;
        }
        Command::Extrapolate { channel, t, target_rate, out } => {
            let mut m = ManifestBuilder::new("extrapolate", args(), None);
            m.input(&channel)?;
            let data = read_channel(&channel)?;
            let mut grid = t.unwrap_or_else(|| DEFAULT_T_GRID.to_vec());
            if let Some(rate) = target_rate {
                grid.push(t_for_average_rate(&data.eigenvalues, rate)?);
            }
            let family = ChannelFamily::build(&data.eigenvalues, &grid)?;
            m.outputs(&write_family(&out, &family, data.header.layout, &channel.display().to_string())?);
            let weights = sibling(&out, "weights.csv");
            write_weight_csv(&family, BufWriter::new(File::create(&weights)?))?;
            m.output(&weights);
            m.finish(&out)?;
        }
        Command::Decode { family, models, samples, repeats, seed, decoder, out } => {
            let seed = require_seed(seed, "decode")?;
            let mut m = ManifestBuilder::new("decode", args(), Some(seed));
            m.input(&family)?;
            let (manifest, fam) = read_family(&family)?;
            let n = fam.members.first().ok_or_else(|| LaceError::Data("empty family".into()))?.distribution.num_sites();
            let layout = channel_layout(manifest.layout, n)?;
            let config = parse_decoder(&decoder, &layout)?;
            let mut rows = Vec::new();
            for member in &fam.members {
                let oracle = MarginalOracle::new(&member.distribution)?;
                for name in &models {
                    let dist: ProbDist = if name == "full" {
                        member.distribution.clone()
                    } else {
                        fit_kind(name.parse()?, &layout, &oracle, &FitOptions::default())?.dist()?
                    };
                    let r = logical_error_rate_with(&layout, &dist, &config, samples, repeats, seed)?;
                    rows.push(RateRow {
                        source: manifest.source.clone(),
                        model: name.clone(),
                        t: member.t,
                        avg_physical_rate: dist.mean_site_rate(),
                        logical_rate: r.rate,
                        two_sigma: 2.0 * r.sigma,
                    });
                }
            }
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&out)?));
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            m.output(&out);
            m.finish(&out)?;
        }
        Command::Report { channel, family, rates, out } => {
            let mut m = ManifestBuilder::new("report", args(), None);
            m.input(&channel)?;
            let data = read_channel(&channel)?;
            let corr = correlation_matrix(&data.distribution)?;
            let n = data.distribution.num_sites();
            let rho: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| corr.rho(i, j)).collect()).collect();
            let mut doc = serde_json::json!({
                "layout": data.header.layout,
                "qubit_rates": data.header.qubit_rates,
                "average_rate": data.distribution.mean_site_rate(),
                "fit_summary": data.header.summary,
                "correlations": rho,
            });
            if let Some(path) = &family {
                m.input(path)?;
                let (manifest, _) = read_family(path)?;
                doc["family"] = serde_json::to_value(&manifest.members)?;
            }
            if let Some(path) = &rates {
                m.input(path)?;
                let mut reader = csv::Reader::from_path(path)?;
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = reader
                    .records()
                    .map(|r| {
                        let r = r?;
                        Ok(["source", "model", "t", "avg_physical_rate", "logical_rate", "two_sigma"]
                            .iter()
                            .zip(r.iter())
                            .map(|(k, v)| {
                                let value = v.parse::<f64>().map(serde_json::Value::from).unwrap_or_else(|_| v.into());
                                (k.to_string(), value)
                            })
                            .collect())
                    })
                    .collect::<Result<_>>()?;
                doc["logical_rates"] = rows.into();
            }
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
            m.output(&out);
            m.finish(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 3,
                ErrorCategory::Data => 4,
                ErrorCategory::Numeric => 5,
            })
        }
    }
}
