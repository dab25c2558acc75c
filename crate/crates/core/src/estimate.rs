//! From shot records to the learned channel: empirical distributions, decay fits,
//! reconstruction, marginal rates, correlations and bootstrap intervals.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::prob::{project_simplex, wht_forward, wht_inverse, EigenvalueVector, ProbDist, MAX_SITES};
use crate::protocol::ShotArchive;
use crate::rng::{domain, stream};

/// Observed flip distribution of the selected sites at one block count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEntry {
    pub m: usize,
    pub shots: usize,
    pub dist: ProbDist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Empirical {
    pub sites: Vec<usize>,
    /// Sorted by `m`.
    pub entries: Vec<EmpiricalEntry>,
}

/// Gather `sites` of `word` into the low bits.
#[inline]
fn gather(word: u64, sites: &[usize]) -> usize {
    sites.iter().enumerate().fold(0, |acc, (k, &s)| acc | (((word >> s) & 1) as usize) << k)
}

fn check_sites(archive: &ShotArchive, sites: &[usize]) -> Result<()> {
    if sites.len() > MAX_SITES {
        return Err(LaceError::Size(format!("{} sites exceeds the dense cap of {MAX_SITES}", sites.len())));
    }
    let mut seen = 0u64;
    for &s in sites {
        if s >= archive.n_data {
            return Err(LaceError::InvalidSite(format!("site {s} is not a data qubit")));
        }
        if seen >> s & 1 == 1 {
            return Err(LaceError::InvalidSite(format!("duplicate site {s}")));
        }
        seen |= 1 << s;
    }
    Ok(())
}

/// Normalized histograms of the data-qubit indicator words restricted to `sites`, per `m`.
pub fn empirical_dists(archive: &ShotArchive, sites: &[usize]) -> Result<Empirical> {
    check_sites(archive, sites)?;
    if archive.records.is_empty() {
        return Err(LaceError::Data("no shot records".into()));
    }
    let identity = sites.iter().enumerate().all(|(k, &s)| k == s);
    let mask = if sites.len() >= 64 { u64::MAX } else { (1u64 << sites.len()) - 1 };
    let mut counts: BTreeMap<usize, (usize, Vec<u64>)> = BTreeMap::new();
    for r in &archive.records {
        let (shots, hist) = counts.entry(r.m).or_insert_with(|| (0, vec![0; 1 << sites.len()]));
        *shots += r.words.len();
        for &w in &r.words {
            let k = if identity { (w & mask) as usize } else { gather(w, sites) };
            hist[k] += 1;
        }
    }
    let mut entries = Vec::with_capacity(counts.len());
    for (m, (shots, hist)) in counts {
        if shots == 0 {
            return Err(LaceError::Data(format!("no shots recorded for m = {m}")));
        }
        let values = hist.iter().map(|&c| c as f64 / shots as f64).collect();
        entries.push(EmpiricalEntry { m, shots, dist: ProbDist::new(sites.len(), values)? });
    }
    Ok(Empirical { sites: sites.to_vec(), entries })
}

impl Empirical {
    /// Error unless every `m` of `m_grid` has data.
    pub fn check_covers(&self, m_grid: &[usize]) -> Result<()> {
        for m in m_grid {
            if !self.entries.iter().any(|e| e.m == *m) {
                return Err(LaceError::Data(format!("no records for m = {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub index: usize,
    pub a: f64,
    pub f: f64,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub points_used: usize,
    /// `f` or `A` was moved onto its bound.
    pub clamped: bool,
    /// Fewer than two usable points; `f` set to 0.
    pub unrecoverable: bool,
}

const MIN_LAMBDA: f64 = 1e-6;
const A_MAX: f64 = 1.05;

/// Fit `y(m) = A·fᵐ` by weighted least squares: log-linear start, then damped Gauss–Newton.
///
/// Points with `y ≤ 1e-6` are dropped. Afterwards `f` is clamped to `[0, 1]`; if that
/// moves it, `A` is refit with `f` fixed, then clamped to `(0, 1.05]`.
pub fn fit_decay(index: usize, ms: &[f64], ys: &[f64], weights: &[f64]) -> DecayFit {
    let pts: Vec<(f64, f64, f64)> =
        ms.iter().zip(ys).zip(weights).filter(|((_, &y), _)| y > MIN_LAMBDA).map(|((&m, &y), &w)| (m, y, w)).collect();
    let distinct = {
        let mut v: Vec<f64> = pts.iter().map(|p| p.0).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        let all_small = ys.iter().all(|&y| y <= MIN_LAMBDA);
        return DecayFit {
            index,
            a: 1.0,
            f: 0.0,
            residual: f64::NAN,
            points_used: pts.len(),
            clamped: all_small,
            unrecoverable: !all_small,
        };
    }
    // log-linear start, weights w·y² from the delta method
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(m, y, w) in &pts {
        let lw = w * y * y;
        let ly = y.ln();
        s0 += lw;
        s1 += lw * m;
        s2 += lw * m * m;
        t0 += lw * ly;
        t1 += lw * m * ly;
    }
    let det = s0 * s2 - s1 * s1;
    let slope = (s0 * t1 - s1 * t0) / det;
    let intercept = (t0 - slope * s1) / s0;
    let mut a = intercept.exp();
    let mut f = slope.exp();

    let cost = |a: f64, f: f64| pts.iter().map(|&(m, y, w)| w * (y - a * f.powf(m)).powi(2)).sum::<f64>();
    let mut current = cost(a, f);
    let mut damping = 1e-9;
    for _ in 0..60 {
        let (mut jaa, mut jaf, mut jff, mut ga, mut gf) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(m, y, w) in &pts {
            let fm = f.powf(m);
            let da = fm;
            let df = if m == 0.0 { 0.0 } else { a * m * f.powf(m - 1.0) };
            let r = y - a * fm;
            jaa += w * da * da;
            jaf += w * da * df;
            jff += w * df * df;
            ga += w * da * r;
            gf += w * df * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (daa, dff) = (jaa * (1.0 + damping), jff * (1.0 + damping));
            let d = daa * dff - jaf * jaf;
            if d.abs() < 1e-300 {
                break;
            }
            let step_a = (dff * ga - jaf * gf) / d;
            let step_f = (daa * gf - jaf * ga) / d;
            let (na, nf) = (a + step_a, (f + step_f).max(0.0));
            let c = cost(na, nf);
            if c <= current {
                let small = (na - a).abs() < 1e-15 && (nf - f).abs() < 1e-15;
                a = na;
                f = nf;
                current = c;
                damping = (damping * 0.1).max(1e-12);
                improved = !small;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let mut clamped = false;
    if !(0.0..=1.0).contains(&f) || !f.is_finite() {
        f = if f.is_finite() { f.clamp(0.0, 1.0) } else { 0.0 };
        let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), &(m, y, w)| {
            let fm = f.powf(m);
            (n + w * y * fm, d + w * fm * fm)
        });
        a = if den > 0.0 { num / den } else { 1.0 };
        clamped = true;
    }
    if !(a > 0.0) || a > A_MAX {
        a = if a > A_MAX { A_MAX } else { 1e-12 };
        clamped = true;
    }
    DecayFit { index, a, f, residual: cost(a, f), points_used: pts.len(), clamped, unrecoverable: false }
}

/// Weight of one mean-of-±1 estimate with `shots` samples: inverse of its binomial variance.
fn lambda_weight(lambda: f64, shots: usize) -> f64 {
    let n = shots as f64;
    n / (1.0 - lambda * lambda).max(1.0 / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub m_values: Vec<usize>,
    pub clamped: usize,
    pub unrecoverable: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedChannel {
    pub sites: Vec<usize>,
    /// Fitted decays, entry 0 fixed to 1.
    pub eigenvalues: EigenvalueVector,
    pub distribution: ProbDist,
    pub fits: Vec<DecayFit>,
    pub summary: FitSummary,
}

/// Per-`m` eigenvalue vectors `λ̄(m) = W p_m`.
pub fn eigen_data(emp: &Empirical) -> Result<Vec<(usize, usize, EigenvalueVector)>> {
    emp.entries.iter().map(|e| Ok((e.m, e.shots, wht_forward(&e.dist)?))).collect()
}

/// Fit every eigenvalue index of the empirical data and reconstruct the channel.
pub fn fit_decays(emp: &Empirical) -> Result<LearnedChannel> {
    if emp.entries.len() < 2 {
        return Err(LaceError::Data("decay fitting needs at least two distinct m values".into()));
    }
    let n = emp.sites.len();
    let data = eigen_data(emp)?;
    let ms: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
    let fits: Vec<DecayFit> = (0..1usize << n)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            if i == 0 {
                return DecayFit {
                    index: 0,
                    a: 1.0,
                    f: 1.0,
                    residual: 0.0,
                    points_used: ms.len(),
                    clamped: false,
                    unrecoverable: false,
                };
            }
            let ys: Vec<f64> = data.iter().map(|d| d.2.values()[i]).collect();
            let ws: Vec<f64> = data.iter().zip(&ys).map(|(d, &y)| lambda_weight(y, d.1)).collect();
            fit_decay(i, &ms, &ys, &ws)
        })
        .collect();
    let f: Vec<f64> = fits.iter().map(|d| d.f).collect();
    let eigenvalues = EigenvalueVector::new(n, f)?;
    let distribution = project_simplex(&wht_inverse(&eigenvalues)?)?;
    let summary = FitSummary {
        m_values: data.iter().map(|d| d.0).collect(),
        clamped: fits.iter().filter(|d| d.clamped).count(),
        unrecoverable: fits.iter().filter(|d| d.unrecoverable).count(),
        max_residual: fits.iter().map(|d| d.residual).filter(|r| r.is_finite()).fold(0.0, f64::max),
    };
    Ok(LearnedChannel { sites: emp.sites.clone(), eigenvalues, distribution, fits, summary })
}

impl LearnedChannel {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Diagnostics without the per-index fits beyond single sites.
    pub fn diagnostics_json(&self) -> Result<String> {
        let singles: Vec<&DecayFit> = (0..self.num_sites()).map(|k| &self.fits[1 << k]).collect();
        let flagged: Vec<usize> =
            self.fits.iter().filter(|d| d.clamped || d.unrecoverable).map(|d| d.index).take(1000).collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "sites": self.sites,
            "summary": self.summary,
            "single_site_fits": singles,
            "flagged_indices_first_1000": flagged,
        }))?)
    }
}

/// Per-site error rate from a single-site decay: `(1 − fᵗ)/2` at `t = 1/2` per round, `t = 1` per block.
pub fn rate_from_decay(f: f64, per_round: bool) -> f64 {
    let f = f.max(crate::counterfactual::EIGEN_FLOOR);
    if per_round {
        (1.0 - f.sqrt()) / 2.0
    } else {
        (1.0 - f) / 2.0
    }
}

/// Per-qubit error rates. `per_round = false` gives the per-block marginals of the
/// distribution; `per_round = true` the marginals of the `t = 1/2` channel.
pub fn qubit_error_rates(channel: &LearnedChannel, per_round: bool) -> Result<Vec<f64>> {
    if per_round {
        let half = crate::counterfactual::interpolate(&channel.eigenvalues, 0.5)?;
        Ok(half.distribution.site_rates())
    } else {
        Ok(channel.distribution.site_rates())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub n: usize,
    pub means: Vec<f64>,
    /// Row-major `n × n`.
    pub cov: Vec<f64>,
    pub rho: Vec<f64>,
    /// Sites with zero variance; their rows of `rho` are zero.
    pub degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.rho[i * self.n + j]
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.n + j]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["site".to_string()];
        header.extend((0..self.n).map(|j| format!("q{j}")));
        out.write_record(&header)?;
        for i in 0..self.n {
            let mut row = vec![format!("q{i}")];
            row.extend((0..self.n).map(|j| format!("{:.6}", self.rho(i, j))));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Moments and Pearson correlations of the indicator bits, read off the eigenvalues:
/// `E[x_i] = (1 − λ_i)/2`, `E[x_i x_j] = (1 − λ_i − λ_j + λ_ij)/4`.
pub fn correlation_from_eigenvalues(l: &EigenvalueVector) -> CorrelationMatrix {
    let n = l.num_sites();
    let v = l.values();
    let means: Vec<f64> = (0..n).map(|i| (1.0 - v[1 << i]) / 2.0).collect();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let e_ij = if i == j { means[i] } else { (1.0 - v[1 << i] - v[1 << j] + v[(1 << i) | (1 << j)]) / 4.0 };
            cov[i * n + j] = e_ij - means[i] * means[j];
        }
    }
    let degenerate: Vec<usize> = (0..n).filter(|&i| cov[i * n + i] <= 1e-15).collect();
    let mut rho = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if degenerate.contains(&i) || degenerate.contains(&j) {
                continue;
            }
            rho[i * n + j] =
                if i == j { 1.0 } else { (cov[i * n + j] / (cov[i * n + i] * cov[j * n + j]).sqrt()).clamp(-1.0, 1.0) };
        }
    }
    CorrelationMatrix { n, means, cov, rho, degenerate }
}

pub fn correlation_matrix(p: &ProbDist) -> Result<CorrelationMatrix> {
    Ok(correlation_from_eigenvalues(&wht_forward(p)?))
}

/// Estimators available to [`bootstrap`].
pub const ESTIMATOR_TAGS: [&str; 4] = ["qubit_rates", "qubit_rates_block", "qubit_decays", "correlations"];

/// Per-sequence sufficient statistics: shot count, per-site ones, per-pair coincidences.
struct SeqStats {
    m: usize,
    shots: usize,
    ones: Vec<u64>,
    pairs: Vec<u64>,
}

fn sequence_stats(archive: &ShotArchive, with_pairs: bool) -> Vec<SeqStats> {
    let n = archive.n_data;
    archive
        .records
        .par_iter()
        .map(|r| {
            let mut ones = vec![0u64; n];
            let mut pairs = if with_pairs { vec![0u64; n * n] } else { vec![] };
            for w in r.data_words(n) {
                let mut bits = w;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    ones[i] += 1;
                    if with_pairs {
                        let mut rest = bits & (bits - 1);
                        while rest != 0 {
                            let j = rest.trailing_zeros() as usize;
                            pairs[i * n + j] += 1;
                            rest &= rest - 1;
                        }
                    }
                    bits &= bits - 1;
                }
            }
            SeqStats { m: r.m, shots: r.words.len(), ones, pairs }
        })
        .collect()
}

/// Scalar outputs of a tagged estimator computed from pooled per-`m` statistics.
fn evaluate_tag(tag: &str, n: usize, pooled: &BTreeMap<usize, (usize, Vec<u64>, Vec<u64>)>) -> Result<Vec<f64>> {
    let ms: Vec<f64> = pooled.keys().map(|&m| m as f64).collect();
    let fit_index = |lam: &dyn Fn(usize, &[u64], &[u64]) -> f64| -> f64 {
        let ys: Vec<f64> = pooled.values().map(|(s, o, p)| lam(*s, o, p)).collect();
        let ws: Vec<f64> = pooled.values().zip(&ys).map(|((s, _, _), &y)| lambda_weight(y, *s)).collect();
        fit_decay(0, &ms, &ys, &ws).f
    };
    let single = |i: usize| fit_index(&|s, o, _| 1.0 - 2.0 * o[i] as f64 / s as f64);
    match tag {
        "qubit_decays" => Ok((0..n).map(single).collect()),
        "qubit_rates" => Ok((0..n).map(|i| rate_from_decay(single(i), true)).collect()),
        "qubit_rates_block" => Ok((0..n).map(|i| rate_from_decay(single(i), false)).collect()),
        "correlations" => {
            let f1: Vec<f64> = (0..n).map(single).collect();
            let mut out = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    // λ_ij from E[(−1)^{x_i ⊕ x_j}] = 1 − 2(n_i + n_j − 2 n_ij)/N
                    let fij = fit_index(&|s, o, p| 1.0 - 2.0 * (o[i] + o[j] - 2 * p[i * n + j]) as f64 / s as f64);
                    let mut l = vec![1.0; 4];
                    l[1] = f1[i];
                    l[2] = f1[j];
                    l[3] = fij;
                    let c = correlation_from_eigenvalues(&EigenvalueVector::new(2, l)?);
                    out.push(c.rho(0, 1));
                }
            }
            Ok(out)
        }
        other => Err(LaceError::UnknownEstimator(other.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub tag: String,
    pub replicates: usize,
    pub point: Vec<f64>,
    /// 2.5th percentile per scalar.
    pub lower: Vec<f64>,
    /// 97.5th percentile per scalar.
    pub upper: Vec<f64>,
}

impl BootstrapResult {
    /// Half-width of the interval divided by the point estimate.
    pub fn relative_half_widths(&self) -> Vec<f64> {
        self.point.iter().zip(self.lower.iter().zip(&self.upper)).map(|(p, (l, u))| (u - l) / 2.0 / p.abs()).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l) / 2.0).collect()
    }
}

fn pool(stats: &[SeqStats], picks: &[usize], n: usize) -> BTreeMap<usize, (usize, Vec<u64>, Vec<u64>)> {
    let mut out: BTreeMap<usize, (usize, Vec<u64>, Vec<u64>)> = BTreeMap::new();
    for &k in picks {
        let s = &stats[k];
        let e = out.entry(s.m).or_insert_with(|| (0, vec![0; n], vec![0; s.pairs.len()]));
        e.0 += s.shots;
        e.1.iter_mut().zip(&s.ones).for_each(|(a, b)| *a += b);
        e.2.iter_mut().zip(&s.pairs).for_each(|(a, b)| *a += b);
    }
    out
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap: resample sequences with replacement within each `m`, rerun the
/// tagged estimator, report the 2.5/97.5 percentiles. Replicate `b` draws from its own
/// stream, so results do not depend on scheduling.
pub fn bootstrap(archive: &ShotArchive, tag: &str, replicates: usize, seed: u64) -> Result<BootstrapResult> {
    if !ESTIMATOR_TAGS.contains(&tag) {
        return Err(LaceError::UnknownEstimator(tag.to_string()));
    }
    if replicates < 100 {
        return Err(LaceError::Config(format!("bootstrap needs at least 100 replicates, got {replicates}")));
    }
    if archive.records.is_empty() {
        return Err(LaceError::Data("no shot records".into()));
    }
    let n = archive.n_data;
    let stats = sequence_stats(archive, tag == "correlations");
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in stats.iter().enumerate() {
        groups.entry(s.m).or_default().push(k);
    }
    if groups.len() < 2 {
        return Err(LaceError::Data("decay fitting needs at least two distinct m values".into()));
    }
    let all: Vec<usize> = (0..stats.len()).collect();
    let point = evaluate_tag(tag, n, &pool(&stats, &all, n))?;
    let samples: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, &[domain::BOOTSTRAP, b]);
            let picks: Vec<usize> = groups
                .values()
                .flat_map(|g| (0..g.len()).map(|_| g[rng.random_range(0..g.len())]).collect::<Vec<_>>())
                .collect();
            evaluate_tag(tag, n, &pool(&stats, &picks, n))
        })
        .collect::<Result<_>>()?;
    let k = point.len();
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for j in 0..k {
        let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        lower.push(percentile(&col, 0.025));
        upper.push(percentile(&col, 0.975));
    }
    Ok(BootstrapResult { tag: tag.to_string(), replicates, point, lower, upper })
}

/// The tagged estimator on the full archive (no resampling).
pub fn point_estimate(archive: &ShotArchive, tag: &str) -> Result<Vec<f64>> {
    let stats = sequence_stats(archive, tag == "correlations");
    let all: Vec<usize> = (0..stats.len()).collect();
    evaluate_tag(tag, archive.n_data, &pool(&stats, &all, archive.n_data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ShotRecord;

    fn archive(records: Vec<(usize, Vec<u64>)>, n: usize) -> ShotArchive {
        let shots = records[0].1.len();
        ShotArchive {
            n_qubits: n,
            n_data: n,
            shots,
            records: records
                .into_iter()
                .enumerate()
                .map(|(k, (m, words))| ShotRecord { sequence_id: k as u64, m, words })
                .collect(),
        }
    }

    #[test]
    fn empirical_examples() {
        let a = archive(vec![(0, vec![0b00, 0b00, 0b01, 0b11])], 2);
        let e = empirical_dists(&a, &[0, 1]).unwrap();
        assert_eq!(e.entries[0].dist.values(), &[0.5, 0.25, 0.0, 0.25]);
        let swapped = empirical_dists(&a, &[1, 0]).unwrap();
        assert_eq!(swapped.entries[0].dist.values(), &[0.5, 0.0, 0.25, 0.25]);
        assert!(e.check_covers(&[0, 1]).is_err());
        assert!(empirical_dists(&a, &[0, 0]).is_err());
        let single = archive(vec![(3, vec![0b10])], 2);
        assert_eq!(empirical_dists(&single, &[0, 1]).unwrap().entries[0].dist.values(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn exact_model_is_recovered() {
        let ms: Vec<f64> = [0, 1, 2, 3, 4, 6, 8].iter().map(|&m| m as f64).collect();
        let ys: Vec<f64> = ms.iter().map(|&m| 0.98 * 0.95f64.powf(m)).collect();
        let fit = fit_decay(1, &ms, &ys, &[1.0; 7]);
        assert!((fit.f - 0.95).abs() < 1e-9 && (fit.a - 0.98).abs() < 1e-9, "{fit:?}");
        assert!(!fit.clamped);
        let ones = fit_decay(1, &ms, &[1.0; 7], &[1.0; 7]);
        assert!((ones.f - 1.0).abs() < 1e-12 && (ones.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_indices_are_flagged() {
        let ms = [0.0, 1.0, 2.0];
        let zero = fit_decay(3, &ms, &[0.0, 0.0, 0.0], &[1.0; 3]);
        assert_eq!(zero.f, 0.0);
        assert!(zero.clamped && !zero.unrecoverable);
        let one_point = fit_decay(3, &ms, &[0.5, -0.1, 0.0], &[1.0; 3]);
        assert!(one_point.unrecoverable && one_point.f == 0.0);
        let growing = fit_decay(3, &ms, &[0.5, 0.6, 0.72], &[1.0; 3]);
        assert!(growing.clamped && growing.f == 1.0);
    }

    #[test]
    fn correlation_examples() {
        let p = ProbDist::new(2, vec![0.85, 0.05, 0.05, 0.05]).unwrap();
        let c = correlation_matrix(&p).unwrap();
        // E[x]=0.1, E[xy]=0.05: (0.05 − 0.01)/0.09
        assert!((c.rho(0, 1) - 4.0 / 9.0).abs() < 1e-12);
        let prod = ProbDist::product(&[0.1, 0.3, 0.2]).unwrap();
        let c = correlation_matrix(&prod).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| i == j || c.rho(i, j).abs() < 1e-12)));
        let same = ProbDist::new(2, vec![0.9, 0.0, 0.0, 0.1]).unwrap();
        assert!((correlation_matrix(&same).unwrap().rho(0, 1) - 1.0).abs() < 1e-12);
        let constant = ProbDist::new(2, vec![0.9, 0.1, 0.0, 0.0]).unwrap();
        let c = correlation_matrix(&constant).unwrap();
        assert_eq!(c.degenerate, vec![1]);
        assert_eq!(c.rho(0, 1), 0.0);
    }

    #[test]
    fn bootstrap_of_identical_records_has_zero_width() {
        let a = archive(
            vec![(0, vec![0, 1, 0, 0]), (0, vec![0, 1, 0, 0]), (2, vec![1, 1, 0, 0]), (2, vec![1, 1, 0, 0])],
            1,
        );
        let b = bootstrap(&a, "qubit_rates", 100, 1).unwrap();
        assert_eq!(b.lower, b.upper);
        assert!(matches!(bootstrap(&a, "nope", 100, 1), Err(LaceError::UnknownEstimator(_))));
        assert!(bootstrap(&a, "qubit_rates", 10, 1).is_err());
    }
}
