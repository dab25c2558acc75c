//! Factor-graph noise models (IID, IND, Ising, CG1D), their fitting and sampling, and
//! the metrics used to compare them against a reference distribution.
//!
//! Couplings use the `−log` convention: `−log p(x) + log p(0) = Σ_{b ⊆ ones(x)} J_b`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::estimate::correlation_matrix;
use crate::pauli::BitString;
use crate::prob::{wht_forward, EigenvalueVector, ProbDist, MAX_SITES};
use crate::rng::{domain, stream};
use crate::surface::CodeLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Iid,
    Ind,
    Ising,
    Cg1d,
    Custom,
}

impl std::str::FromStr for ModelKind {
    type Err = LaceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" => Ok(Self::Iid),
            "ind" => Ok(Self::Ind),
            "ising" => Ok(Self::Ising),
            "cg1d" => Ok(Self::Cg1d),
            "custom" => Ok(Self::Custom),
            other => Err(LaceError::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Iid => "iid",
            Self::Ind => "ind",
            Self::Ising => "ising",
            Self::Cg1d => "cg1d",
            Self::Custom => "custom",
        })
    }
}

fn mask_of(sites: &[usize]) -> u64 {
    sites.iter().fold(0, |m, &s| m | 1 << s)
}

fn sites_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Every nonempty subset of `mask`.
fn subsets(mask: u64) -> impl Iterator<Item = u64> {
    let mut sub = mask;
    let mut done = mask == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = sub;
        sub = (sub.wrapping_sub(1)) & mask;
        done = sub == 0;
        Some(out)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorGraph {
    pub kind: ModelKind,
    pub n: usize,
    pub factors: Vec<Vec<usize>>,
    /// Super-variables of the coarse-grained chain (CG1D only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn build(kind: ModelKind, layout: &CodeLayout) -> Result<Self> {
        let n = layout.n_data();
        let singles = || (0..n).map(|i| vec![i]).collect::<Vec<_>>();
        match kind {
            ModelKind::Iid | ModelKind::Ind => Ok(Self { kind, n, factors: singles(), lines: vec![] }),
            ModelKind::Ising => {
                let factors = layout.data_edges().into_iter().map(|(a, b)| vec![a, b]).collect();
                Ok(Self { kind, n, factors, lines: vec![] })
            }
            ModelKind::Cg1d => {
                // lines along the short axis, chained along the long one
                let lines: Vec<Vec<usize>> = if layout.rows <= layout.cols {
                    (0..layout.cols).map(|c| (0..layout.rows).map(|r| layout.data_index(r, c)).collect()).collect()
                } else {
                    (0..layout.rows).map(|r| (0..layout.cols).map(|c| layout.data_index(r, c)).collect()).collect()
                };
                Self::chain(lines)
            }
            ModelKind::Custom => Err(LaceError::Config("custom graphs are built with FactorGraph::custom".into())),
        }
    }

    /// Coarse-grained chain over the given super-variables (each ≤ 4 sites wide pairs to ≤ 8).
    pub fn chain(lines: Vec<Vec<usize>>) -> Result<Self> {
        let n = lines.iter().map(|l| l.len()).sum();
        let mut all: Vec<usize> = lines.iter().flatten().copied().collect();
        all.sort_unstable();
        if all != (0..n).collect::<Vec<_>>() {
            return Err(LaceError::Config("chain lines must partition the sites".into()));
        }
        if lines.len() < 2 {
            return Err(LaceError::Config("a chain needs at least two lines".into()));
        }
        let factors: Vec<Vec<usize>> = lines.windows(2).map(|w| w.concat()).collect();
        if factors.iter().any(|f| f.len() > 8) {
            return Err(LaceError::Config("chain factors are limited to 8 sites".into()));
        }
        Ok(Self { kind: ModelKind::Cg1d, n, factors, lines })
    }

    pub fn custom(n: usize, factors: Vec<Vec<usize>>) -> Result<Self> {
        if n > MAX_SITES {
            return Err(LaceError::Size(format!("{n} sites exceeds the dense cap")));
        }
        for f in &factors {
            if f.is_empty() || f.len() > 8 || f.iter().any(|&s| s >= n) {
                return Err(LaceError::Config(format!("bad factor {f:?}")));
            }
        }
        Ok(Self { kind: ModelKind::Custom, n, factors, lines: vec![] })
    }

    /// Free parameters: one shared rate (IID), one per site (IND), else one entry per
    /// factor-table cell.
    pub fn parameter_count(&self) -> usize {
        match self.kind {
            ModelKind::Iid => 1,
            ModelKind::Ind => self.n,
            _ => self.factors.iter().map(|f| 1usize << f.len()).sum(),
        }
    }

    /// Cliques carrying a coupling: all nonempty subsets of factor supports, plus every
    /// singleton; ordered by size then mask.
    pub fn cliques(&self) -> Vec<u64> {
        let mut out: Vec<u64> = (0..self.n).map(|i| 1u64 << i).collect();
        for f in &self.factors {
            out.extend(subsets(mask_of(f)));
        }
        out.sort_unstable_by_key(|&m| (m.count_ones(), m));
        out.dedup();
        out
    }

    /// Sites sharing a factor with `clique`, excluding the clique itself.
    pub fn blanket(&self, clique: u64) -> u64 {
        let mut b = 0;
        for f in &self.factors {
            let m = mask_of(f);
            if m & clique != 0 {
                b |= m;
            }
        }
        b & !clique
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub couplings: BTreeMap<u64, f64>,
    /// Cliques whose conditional table had empty cells and was smoothed.
    pub smoothed: Vec<u64>,
}

/// Consecutive line-pair marginals of a coarse-grained chain. Table `k` is indexed by
/// `x_{line k} | x_{line k+1} << |line k|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTables {
    pub pair_tables: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Couplings(CouplingSet),
    Chain(ChainTables),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub graph: FactorGraph,
    pub params: ModelParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Effective sample size behind the source; empty conditional cells get `0.5 / pseudo_total`.
    pub pseudo_total: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { pseudo_total: 1e6 }
    }
}

/// Marginals of a source distribution, served from its eigenvalues.
pub struct MarginalOracle {
    eigen: EigenvalueVector,
}

impl MarginalOracle {
    pub fn new(p: &ProbDist) -> Result<Self> {
        Ok(Self { eigen: wht_forward(p)? })
    }

    pub fn from_eigenvalues(eigen: EigenvalueVector) -> Self {
        Self { eigen }
    }

    pub fn num_sites(&self) -> usize {
        self.eigen.num_sites()
    }

    pub fn marginal(&self, sites: &[usize]) -> Result<ProbDist> {
        self.eigen.marginal(sites)
    }
}

/// Local Möbius inversion `J = −A⁻¹ log v` with `A⁻¹ = [[1,0],[−1,1]]^{⊗k}`: returns
/// `Σ_{b ⊆ top} (−1)^{|top|−|b|} (−log v_b)` for every subset `top` at once.
fn mobius(mut logs: Vec<f64>) -> Vec<f64> {
    let len = logs.len();
    let mut h = 1;
    while h < len {
        for block in logs.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter().zip(hi.iter_mut()) {
                *b -= a;
            }
        }
        h *= 2;
    }
    logs
}

/// Fit a model to `source`.
///
/// IID and IND use the single-site marginals. Ising and custom graphs solve each clique's
/// coupling from `p(x_r | 0_∂r)`, the conditional with the clique's blanket pinned to
/// zero. CG1D stores consecutive line-pair marginals and evaluates by the chain rule.
pub fn estimate_couplings(graph: &FactorGraph, source: &MarginalOracle, opts: &FitOptions) -> Result<NoiseModel> {
    if source.num_sites() != graph.n {
        return Err(LaceError::SizeMismatch { expected: graph.n, got: source.num_sites() });
    }
    let params = match graph.kind {
        ModelKind::Iid | ModelKind::Ind => {
            let rates: Vec<f64> =
                (0..graph.n).map(|i| source.marginal(&[i]).map(|m| m.values()[1])).collect::<Result<_>>()?;
            let rates = if graph.kind == ModelKind::Iid {
                vec![rates.iter().sum::<f64>() / graph.n as f64; graph.n]
            } else {
                rates
            };
            let mut set = CouplingSet::default();
            for (i, q) in rates.into_iter().enumerate() {
                let (mut v0, mut v1) = (1.0 - q, q);
                if v0 <= 0.0 || v1 <= 0.0 {
                    v0 += 0.5 / opts.pseudo_total;
                    v1 += 0.5 / opts.pseudo_total;
                    set.smoothed.push(1 << i);
                }
                set.couplings.insert(1 << i, (v0 / v1).ln());
            }
            ModelParams::Couplings(set)
        }
        ModelKind::Ising | ModelKind::Custom => {
            let cliques = graph.cliques();
            let solved: Vec<(u64, f64, bool)> = cliques
                .par_iter()
                .map(|&r| {
                    let blanket = graph.blanket(r);
                    let mut sites = sites_of(r);
                    let k = sites.len();
                    sites.extend(sites_of(blanket));
                    let joint = source.marginal(&sites)?;
                    let mut cells: Vec<f64> = joint.values()[..1 << k].to_vec();
                    let smoothed = cells.iter().any(|&v| v <= 0.0);
                    if smoothed {
                        cells.iter_mut().for_each(|v| *v = v.max(0.0) + 0.5 / opts.pseudo_total);
                    }
                    let base = cells[0];
                    let logs: Vec<f64> = cells.iter().map(|&v| -(v / base).ln()).collect();
                    Ok((r, mobius(logs)[(1 << k) - 1], smoothed))
                })
                .collect::<Result<_>>()?;
            let mut set = CouplingSet::default();
            for (r, j, s) in solved {
                set.couplings.insert(r, j);
                if s {
                    set.smoothed.push(r);
                }
            }
            ModelParams::Couplings(set)
        }
        ModelKind::Cg1d => {
            let pair_tables = graph
                .lines
                .windows(2)
                .map(|w| source.marginal(&w.concat()).map(|m| m.into_values()))
                .collect::<Result<_>>()?;
            ModelParams::Chain(ChainTables { pair_tables })
        }
    };
    Ok(NoiseModel { graph: graph.clone(), params })
}

impl NoiseModel {
    pub fn kind(&self) -> ModelKind {
        self.graph.kind
    }

    fn couplings(&self) -> Option<&CouplingSet> {
        match &self.params {
            ModelParams::Couplings(c) => Some(c),
            ModelParams::Chain(_) => None,
        }
    }

    /// Error unless every clique the graph requires has a coupling.
    pub fn check_complete(&self) -> Result<()> {
        if let Some(set) = self.couplings() {
            let need = match self.graph.kind {
                ModelKind::Iid | ModelKind::Ind => (0..self.graph.n).map(|i| 1u64 << i).collect(),
                _ => self.graph.cliques(),
            };
            if let Some(&miss) = need.iter().find(|c| !set.couplings.contains_key(c)) {
                return Err(LaceError::MissingClique(sites_of(miss)));
            }
        }
        Ok(())
    }

    /// `(line value, line offsets)` views for the chain.
    fn line_value(&self, line: usize, x: u64) -> usize {
        self.graph.lines[line].iter().enumerate().fold(0, |acc, (k, &s)| acc | ((x >> s & 1) as usize) << k)
    }

    fn chain_prob(&self, tables: &ChainTables, x: u64) -> f64 {
        let lines = &self.graph.lines;
        let mut p = 1.0;
        for (k, t) in tables.pair_tables.iter().enumerate() {
            let a = self.line_value(k, x);
            let b = self.line_value(k + 1, x);
            let joint = t[a | b << lines[k].len()];
            if k == 0 {
                p *= joint;
            } else {
                let w = lines[k].len();
                let marg: f64 = (0..1usize << lines[k + 1].len()).map(|y| t[a | y << w]).sum();
                if marg <= 0.0 {
                    return 0.0;
                }
                p *= joint / marg;
            }
        }
        p
    }

    /// Unnormalized `−log p(x) + log p(0)`.
    pub fn log_prob(&self, x: BitString) -> Result<f64> {
        if x.len() != self.graph.n {
            return Err(LaceError::SizeMismatch { expected: self.graph.n, got: x.len() });
        }
        match &self.params {
            ModelParams::Couplings(_) => {
                self.check_complete()?;
                let set = self.couplings().expect("couplings");
                let ones = x.bits();
                Ok(set.couplings.iter().filter(|(&b, _)| b & ones == b).map(|(_, j)| j).sum())
            }
            ModelParams::Chain(t) => Ok(-(self.chain_prob(t, x.bits()) / self.chain_prob(t, 0)).ln()),
        }
    }

    /// Exact normalized distribution by enumeration.
    pub fn dist(&self) -> Result<ProbDist> {
        let n = self.graph.n;
        if n > MAX_SITES {
            return Err(LaceError::Size(format!("{n} sites exceeds the dense cap")));
        }
        match &self.params {
            ModelParams::Couplings(set) => {
                self.check_complete()?;
                // H(x) = Σ_{b ⊆ x} J_b by a subset-sum (zeta) transform
                let mut h = vec![0.0; 1 << n];
                for (&b, &j) in &set.couplings {
                    h[b as usize] += j;
                }
                let mut step = 1;
                while step < h.len() {
                    for block in h.chunks_mut(2 * step) {
                        let (lo, hi) = block.split_at_mut(step);
                        hi.iter_mut().zip(lo.iter()).for_each(|(b, a)| *b += a);
                    }
                    step *= 2;
                }
                let min = h.iter().copied().fold(f64::INFINITY, f64::min);
                ProbDist::from_weights(n, h.into_iter().map(|v| (min - v).exp()).collect())
            }
            ModelParams::Chain(t) => {
                let w: Vec<f64> = (0..1u64 << n).into_par_iter().map(|x| self.chain_prob(t, x)).collect();
                ProbDist::from_weights(n, w)
            }
        }
    }

    /// Per-site error rates of an IID/IND model.
    fn independent_rates(&self) -> Option<Vec<f64>> {
        let set = self.couplings()?;
        if !matches!(self.graph.kind, ModelKind::Iid | ModelKind::Ind) {
            return None;
        }
        Some((0..self.graph.n).map(|i| 1.0 / (1.0 + set.couplings[&(1u64 << i)].exp())).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut doc = serde_json::json!({
            "kind": self.graph.kind,
            "variables": (0..self.graph.n).collect::<Vec<_>>(),
            "factors": self.graph.factors,
            "parameter_count": self.graph.parameter_count(),
        });
        match &self.params {
            ModelParams::Couplings(set) => {
                let list: Vec<_> =
                    set.couplings.iter().map(|(&b, &j)| serde_json::json!({ "clique": sites_of(b), "J": j })).collect();
                doc["couplings"] = list.into();
                doc["smoothed"] = set.smoothed.iter().map(|&b| sites_of(b)).collect::<Vec<_>>().into();
                if matches!(self.graph.kind, ModelKind::Ising | ModelKind::Custom) {
                    doc["factor_tables"] = self.factor_tables().into();
                }
            }
            ModelParams::Chain(t) => {
                doc["lines"] = self.graph.lines.clone().into();
                doc["couplings"] = Vec::<serde_json::Value>::new().into();
                doc["pair_tables"] = t.pair_tables.clone().into();
            }
        }
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Per-factor `−log` potential tables (`2^{|f|}` cells each) whose sum over factors is
    /// the model energy; couplings of cliques inside several factors are split evenly.
    pub fn factor_tables(&self) -> Vec<Vec<f64>> {
        let Some(set) = self.couplings() else { return vec![] };
        let masks: Vec<u64> = self.graph.factors.iter().map(|f| mask_of(f)).collect();
        let share = |b: u64| masks.iter().filter(|&&m| m & b == b).count().max(1) as f64;
        masks
            .iter()
            .zip(&self.graph.factors)
            .map(|(&m, f)| {
                (0..1usize << f.len())
                    .map(|cell| {
                        let x = f.iter().enumerate().fold(0u64, |acc, (k, &s)| acc | ((cell >> k & 1) as u64) << s);
                        set.couplings
                            .iter()
                            .filter(|(&b, _)| b & m == b && b & x == b)
                            .map(|(&b, j)| j / share(b))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let kind: ModelKind = serde_json::from_value(v["kind"].clone())?;
        let n =
            v["variables"].as_array().map(|a| a.len()).ok_or_else(|| LaceError::Data("missing variables".into()))?;
        let factors: Vec<Vec<usize>> = serde_json::from_value(v["factors"].clone())?;
        if kind == ModelKind::Cg1d {
            let lines: Vec<Vec<usize>> = serde_json::from_value(v["lines"].clone())?;
            let pair_tables: Vec<Vec<f64>> = serde_json::from_value(v["pair_tables"].clone())?;
            let graph = FactorGraph::chain(lines)?;
            return Ok(Self { graph, params: ModelParams::Chain(ChainTables { pair_tables }) });
        }
        #[derive(Deserialize)]
        struct Entry {
            clique: Vec<usize>,
            #[serde(rename = "J")]
            j: f64,
        }
        let entries: Vec<Entry> = serde_json::from_value(v["couplings"].clone())?;
        let smoothed: Vec<Vec<usize>> =
            serde_json::from_value(v.get("smoothed").cloned().unwrap_or_else(|| serde_json::json!([])))?;
        let set = CouplingSet {
            couplings: entries.into_iter().map(|e| (mask_of(&e.clique), e.j)).collect(),
            smoothed: smoothed.iter().map(|c| mask_of(c)).collect(),
        };
        let model =
            Self { graph: FactorGraph { kind, n, factors, lines: vec![] }, params: ModelParams::Couplings(set) };
        model.check_complete()?;
        Ok(model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    pub burn_in: usize,
    pub thin: usize,
    /// Independent chains; samples are dealt to chains round-robin by index.
    pub chains: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self { burn_in: 100, thin: 10, chains: 8 }
    }
}

/// Draw `count` indicator words from the model.
///
/// IID/IND draw sites independently, CG1D samples line by line from the chain, and
/// coupling models run single-site Gibbs sweeps.
pub fn sample_model(model: &NoiseModel, count: usize, seed: u64, gibbs: &GibbsOptions) -> Result<Vec<u64>> {
    let n = model.graph.n;
    if let Some(rates) = model.independent_rates() {
        let mut rng = stream(seed, &[domain::GIBBS, 0]);
        return Ok((0..count)
            .map(|_| rates.iter().enumerate().fold(0u64, |w, (i, &q)| w | ((rng.random::<f64>() < q) as u64) << i))
            .collect());
    }
    match &model.params {
        ModelParams::Chain(t) => {
            let lines = &model.graph.lines;
            let first: Vec<f64> = {
                let w = lines[0].len();
                (0..1usize << w)
                    .map(|a| (0..1usize << lines[1].len()).map(|b| t.pair_tables[0][a | b << w]).sum())
                    .collect()
            };
            let start =
                WeightedAliasIndex::new(first).map_err(|e| LaceError::Numeric(format!("chain sampler: {e}")))?;
            // conditional samplers for line k+1 given line k
            let mut conds: Vec<Vec<Option<WeightedAliasIndex<f64>>>> = Vec::new();
            for (k, table) in t.pair_tables.iter().enumerate() {
                let w = lines[k].len();
                conds.push(
                    (0..1usize << w)
                        .map(|a| {
                            let row: Vec<f64> = (0..1usize << lines[k + 1].len()).map(|b| table[a | b << w]).collect();
                            WeightedAliasIndex::new(row).ok()
                        })
                        .collect(),
                );
            }
            let mut rng = stream(seed, &[domain::GIBBS, 0]);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut x = 0u64;
                let mut cur = start.sample(&mut rng);
                for (k, line) in lines.iter().enumerate() {
                    for (j, &s) in line.iter().enumerate() {
                        x |= ((cur >> j & 1) as u64) << s;
                    }
                    if k + 1 < lines.len() {
                        let sampler = conds[k][cur]
                            .as_ref()
                            .ok_or_else(|| LaceError::Numeric("chain reached a zero-mass line state".into()))?;
                        cur = sampler.sample(&mut rng);
                    }
                }
                out.push(x);
            }
            Ok(out)
        }
        ModelParams::Couplings(set) => {
            model.check_complete()?;
            let mut local: Vec<Vec<(u64, f64)>> = vec![Vec::new(); n];
            for (&b, &j) in &set.couplings {
                for i in sites_of(b) {
                    local[i].push((b & !(1 << i), j));
                }
            }
            let chains = gibbs.chains.max(1).min(count.max(1));
            let per_chain: Vec<Vec<u64>> = (0..chains)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream(seed, &[domain::GIBBS, c as u64 + 1]);
                    let mine = (c..count).step_by(chains).count();
                    let mut x = 0u64;
                    let sweep = |x: &mut u64, rng: &mut rand_chacha::ChaCha8Rng| {
                        for i in 0..n {
                            let dh: f64 = local[i].iter().filter(|(rest, _)| *x & rest == *rest).map(|(_, j)| j).sum();
                            let p1 = 1.0 / (1.0 + dh.exp());
                            if rng.random::<f64>() < p1 {
                                *x |= 1 << i;
                            } else {
                                *x &= !(1 << i);
                            }
                        }
                    };
                    for _ in 0..gibbs.burn_in {
                        sweep(&mut x, &mut rng);
                    }
                    let mut out = Vec::with_capacity(mine);
                    for _ in 0..mine {
                        for _ in 0..gibbs.thin.max(1) {
                            sweep(&mut x, &mut rng);
                        }
                        out.push(x);
                    }
                    out
                })
                .collect();
            Ok((0..count).map(|k| per_chain[k % chains][k / chains]).collect())
        }
    }
}

fn same_len(p: &ProbDist, q: &ProbDist) -> Result<()> {
    if p.num_sites() != q.num_sites() {
        Err(LaceError::SizeMismatch { expected: p.num_sites(), got: q.num_sites() })
    } else {
        Ok(())
    }
}

/// Jensen–Shannon divergence in nats.
pub fn jsd(p: &ProbDist, q: &ProbDist) -> Result<f64> {
    same_len(p, q)?;
    let term = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    Ok(p.values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * term(a, m) + 0.5 * term(b, m)
        })
        .sum::<f64>()
        .max(0.0))
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `‖Σ_p − Σ_q‖₂` of the indicator-vector covariances.
pub fn cov_diff_norm(p: &ProbDist, q: &ProbDist) -> Result<f64> {
    same_len(p, q)?;
    let (a, b) = (correlation_matrix(p)?, correlation_matrix(q)?);
    let n = p.num_sites();
    Ok(spectral_norm(DMatrix::from_fn(n, n, |i, j| a.cov(i, j) - b.cov(i, j))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Check `‖Σ_p − Σ_q‖ ≤ T (D² − ¼‖μ_p − μ_q‖²)` for distributions over outcomes embedded as
/// `embedding[k]`, with `T` the total variation distance and `D` the largest distance
/// between outcomes where `p` and `q` differ.
pub fn cov_bound_check(p: &[f64], q: &[f64], embedding: &[Vec<f64>]) -> Result<CovBound> {
    if p.len() != q.len() || p.len() != embedding.len() {
        return Err(LaceError::SizeMismatch { expected: p.len(), got: q.len().min(embedding.len()) });
    }
    let d = embedding.first().map_or(0, |v| v.len());
    let moments = |w: &[f64]| {
        let mut mu = vec![0.0; d];
        let mut second = DMatrix::<f64>::zeros(d, d);
        for (pk, x) in w.iter().zip(embedding) {
            for i in 0..d {
                mu[i] += pk * x[i];
                for j in 0..d {
                    second[(i, j)] += pk * x[i] * x[j];
                }
            }
        }
        let cov = DMatrix::from_fn(d, d, |i, j| second[(i, j)] - mu[i] * mu[j]);
        (mu, cov)
    };
    let (mp, cp) = moments(p);
    let (mq, cq) = moments(q);
    let lhs = spectral_norm(cp - cq);
    let t = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let support: Vec<usize> = (0..p.len()).filter(|&k| p[k] != q[k]).collect();
    let mut diam2: f64 = 0.0;
    for (a, &i) in support.iter().enumerate() {
        for &j in &support[a + 1..] {
            let dist2: f64 = embedding[i].iter().zip(&embedding[j]).map(|(x, y)| (x - y).powi(2)).sum();
            diam2 = diam2.max(dist2);
        }
    }
    let mean_gap2: f64 = mp.iter().zip(&mq).map(|(a, b)| (a - b).powi(2)).sum();
    let rhs = t * (diam2 - 0.25 * mean_gap2);
    Ok(CovBound { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// Bit-indicator embedding of all `2ⁿ` outcomes.
pub fn indicator_embedding(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n).map(|x| (0..n).map(|i| (x >> i & 1) as f64).collect()).collect()
}

/// Two distributions on `2^k`-bit strings with equal means and covariances but TVD
/// `1 − 2^k·2^{1−2^k}`: uniform over the rows of the Sylvester Hadamard matrix and their
/// complements, versus uniform over all strings.
pub fn hadamard_counterexample(k: u32) -> Result<(ProbDist, ProbDist)> {
    let n = 1usize << k;
    if n > MAX_SITES {
        return Err(LaceError::Size(format!("2^{k} sites exceeds the dense cap")));
    }
    let mut w = vec![0.0; 1 << n];
    for row in 0..n {
        // entry (row, col) is −1 iff popcount(row & col) is odd
        let bits = (0..n).fold(0usize, |acc, col| acc | (((row & col).count_ones() & 1) as usize) << col);
        w[bits] += 1.0;
        w[!bits & ((1 << n) - 1)] += 1.0;
    }
    Ok((ProbDist::from_weights(n, w)?, ProbDist::uniform(n)?))
}

fn entropy(values: &[f64]) -> f64 {
    -values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `H(target | given)` in nats.
pub fn conditional_entropy(oracle: &MarginalOracle, target: usize, given: &[usize]) -> Result<f64> {
    if given.contains(&target) {
        return Err(LaceError::InvalidSite(format!("target {target} is also conditioned on")));
    }
    let mut sites = vec![target];
    sites.extend_from_slice(given);
    let joint = oracle.marginal(&sites)?;
    // the target is bit 0; summing it out leaves the marginal of `given`
    let cond: Vec<f64> = joint.values().chunks(2).map(|c| c[0] + c[1]).collect();
    Ok((entropy(joint.values()) - entropy(&cond)).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlanketResult {
    pub target: usize,
    pub subset: Vec<usize>,
    pub entropy: f64,
}

/// Exhaustive search for the `k`-subset of other sites minimizing `H(target | subset)`.
/// Ties (within 1e-12) go to the lexicographically first subset.
pub fn blanket_search(oracle: &MarginalOracle, target: usize, k: usize) -> Result<BlanketResult> {
    let n = oracle.num_sites();
    if target >= n {
        return Err(LaceError::InvalidSite(format!("target {target} out of range")));
    }
    if k >= n {
        return Err(LaceError::Config(format!("blanket size {k} must be below the site count {n}")));
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != target).collect();
    let mut combos = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        combos.push(idx.iter().map(|&i| others[i]).collect::<Vec<_>>());
        // next combination in lexicographic order
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < others.len() - k + p) else { break };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    let scores: Vec<f64> = combos.par_iter().map(|s| conditional_entropy(oracle, target, s)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] - 1e-12 {
            best = i;
        }
    }
    Ok(BlanketResult { target, subset: combos[best].clone(), entropy: scores[best] })
}

/// One metrics-table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub parameters: usize,
    pub jsd: f64,
    pub cov_norm: f64,
    pub tvd: f64,
}

pub fn metric_row(name: &str, parameters: usize, data: &ProbDist, model: &ProbDist) -> Result<MetricRow> {
    Ok(MetricRow {
        model: name.to_string(),
        parameters,
        jsd: jsd(data, model)?,
        cov_norm: cov_diff_norm(data, model)?,
        tvd: data.tvd(model)?,
    })
}

/// Metrics table as CSV, one row per model.
pub fn write_metric_csv<W: std::io::Write>(rows: &[MetricRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts_on_reference_layout() {
        let l = CodeLayout::new(4, 5).unwrap();
        let count = |k| FactorGraph::build(k, &l).unwrap().parameter_count();
        assert_eq!(count(ModelKind::Iid), 1);
        assert_eq!(count(ModelKind::Ind), 20);
        assert_eq!(count(ModelKind::Ising), 124);
        assert_eq!(count(ModelKind::Cg1d), 1024);
        let ising = FactorGraph::build(ModelKind::Ising, &l).unwrap();
        assert_eq!(ising.factors.len(), 31);
        assert_eq!(ising.cliques().len(), 51);
        assert_eq!(FactorGraph::build(ModelKind::Cg1d, &l).unwrap().factors.len(), 4);
    }

    #[test]
    fn single_bit_coupling() {
        let g = FactorGraph::custom(1, vec![vec![0]]).unwrap();
        let p = ProbDist::new(1, vec![0.9, 0.1]).unwrap();
        let m = estimate_couplings(&g, &MarginalOracle::new(&p).unwrap(), &FitOptions::default()).unwrap();
        let x1 = BitString::new(1, 1).unwrap();
        assert!((m.log_prob(x1).unwrap() - (0.9f64 / 0.1).ln()).abs() < 1e-12);
        assert_eq!(m.log_prob(BitString::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn independent_pair_has_no_pair_coupling() {
        let g = FactorGraph::custom(2, vec![vec![0, 1]]).unwrap();
        let p = ProbDist::product(&[0.1, 0.3]).unwrap();
        let m = estimate_couplings(&g, &MarginalOracle::new(&p).unwrap(), &FitOptions::default()).unwrap();
        let ModelParams::Couplings(set) = &m.params else { panic!() };
        assert!(set.couplings[&0b11].abs() < 1e-12);
        assert!(m.dist().unwrap().tvd(&p).unwrap() < 1e-12);
    }

    #[test]
    fn iid_model_distribution() {
        let l = CodeLayout::new(2, 2).unwrap();
        let g = FactorGraph::build(ModelKind::Iid, &l).unwrap();
        let p = ProbDist::product(&[0.1, 0.2, 0.3, 0.2]).unwrap();
        let m = estimate_couplings(&g, &MarginalOracle::new(&p).unwrap(), &FitOptions::default()).unwrap();
        let want = ProbDist::product(&[0.2; 4]).unwrap();
        assert!(m.dist().unwrap().tvd(&want).unwrap() < 1e-12);
    }

    #[test]
    fn zero_couplings_are_uniform() {
        let g = FactorGraph::custom(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let set = CouplingSet { couplings: g.cliques().into_iter().map(|c| (c, 0.0)).collect(), smoothed: vec![] };
        let m = NoiseModel { graph: g.clone(), params: ModelParams::Couplings(set) };
        assert!(m.dist().unwrap().tvd(&ProbDist::uniform(3).unwrap()).unwrap() < 1e-15);
        let partial = NoiseModel { graph: g, params: ModelParams::Couplings(CouplingSet::default()) };
        assert!(matches!(partial.dist(), Err(LaceError::MissingClique(_))));
    }

    #[test]
    fn metric_examples() {
        let p = ProbDist::new(1, vec![0.9, 0.1]).unwrap();
        let q = ProbDist::uniform(1).unwrap();
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        // hand evaluation: ½·0.9·ln(0.9/0.7) + ½·0.1·ln(0.1/0.3) + ½·0.5·ln(0.5/0.7) + ½·0.5·ln(0.5/0.3)
        let want = 0.5
            * (0.9 * (0.9f64 / 0.7).ln()
                + 0.1 * (0.1f64 / 0.3).ln()
                + 0.5 * (0.5f64 / 0.7).ln()
                + 0.5 * (0.5f64 / 0.3).ln());
        assert!((jsd(&p, &q).unwrap() - want).abs() < 1e-15);
        let d0 = ProbDist::delta(1, 0).unwrap();
        let d1 = ProbDist::delta(1, 1).unwrap();
        assert!((jsd(&d0, &d1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((cov_diff_norm(&d0, &p).unwrap() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn covariance_bound_tightness_example() {
        let (a, d) = (0.1, 1.0);
        let b = cov_bound_check(&[1.0, 0.0], &[1.0 - a, a], &[vec![0.0], vec![d]]).unwrap();
        assert!((b.lhs - d * d * a * (1.0 - a)).abs() < 1e-12);
        assert!((b.rhs - a * (d * d - a * a * d * d / 4.0)).abs() < 1e-12);
        assert!(b.holds);
    }

    #[test]
    fn hadamard_pair_matches_covariance() {
        let (p, q) = hadamard_counterexample(2).unwrap();
        assert!((p.tvd(&q).unwrap() - 0.5).abs() < 1e-15);
        assert!(cov_diff_norm(&p, &q).unwrap() < 1e-15);
    }

    #[test]
    fn conditional_entropy_examples() {
        let p = ProbDist::new(2, vec![0.85, 0.05, 0.05, 0.05]).unwrap();
        let o = MarginalOracle::new(&p).unwrap();
        let h = |v: &[f64]| -v.iter().map(|x| x * x.ln()).sum::<f64>();
        let want = h(&[0.85, 0.05, 0.05, 0.05]) - h(&[0.9, 0.1]);
        assert!((conditional_entropy(&o, 1, &[0]).unwrap() - want).abs() < 1e-12);
        let same = MarginalOracle::new(&ProbDist::new(2, vec![0.7, 0.0, 0.0, 0.3]).unwrap()).unwrap();
        assert!(conditional_entropy(&same, 1, &[0]).unwrap() < 1e-12);
        let ind = ProbDist::product(&[0.2, 0.3]).unwrap();
        let o = MarginalOracle::new(&ind).unwrap();
        assert!((conditional_entropy(&o, 1, &[0]).unwrap() - h(&[0.7, 0.3])).abs() < 1e-12);
    }

    #[test]
    fn blanket_ties_pick_first_subset() {
        let p = ProbDist::product(&[0.1; 5]).unwrap();
        let r = blanket_search(&MarginalOracle::new(&p).unwrap(), 2, 2).unwrap();
        assert_eq!(r.subset, vec![0, 1]);
        assert!(blanket_search(&MarginalOracle::new(&p).unwrap(), 2, 5).is_err());
    }
}
