//! Code-capacity maximum-likelihood decoding and logical error rates.
//!
//! Errors act on data qubits only and syndromes are read perfectly. A decoder picks the
//! most probable logical class (coset of the stabilizer group) consistent with the
//! syndrome under an independent per-qubit Pauli prior. Paulis are `(x, z)` bit masks
//! over the data qubits; logical classes are indexed `x | z << 1`, so I < X < Z < Y,
//! which is also the tie-break order.

pub mod bruteforce;
pub mod mps;
pub mod table;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::pauli::Pauli1;
use crate::prob::{DistSampler, ProbDist};
use crate::rng::{domain, stream};
use crate::surface::CodeLayout;

pub use bruteforce::BruteForceDecoder;
pub use mps::MpsDecoder;
pub use table::TableDecoder;

/// Probabilities within this relative distance of the maximum count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

/// Independent per-qubit Pauli prior, each entry indexed `x | z << 1` (I, X, Z, Y).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliPrior {
    pub probs: Vec<[f64; 4]>,
}

impl PauliPrior {
    pub fn new(probs: Vec<[f64; 4]>) -> Result<Self> {
        for (q, p) in probs.iter().enumerate() {
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(LaceError::Config(format!("prior of qubit {q} is not a distribution")));
            }
        }
        Ok(Self { probs })
    }

    /// Any error with probability `p`, split evenly over X, Y and Z.
    pub fn depolarizing(n: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LaceError::Config(format!("error rate {p} outside [0, 1]")));
        }
        Self::new(vec![[1.0 - p, p / 3.0, p / 3.0, p / 3.0]; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.probs.len()
    }

    /// Probability of the Pauli `(ex, ez)`.
    pub fn prob(&self, ex: u64, ez: u64) -> f64 {
        self.probs.iter().enumerate().map(|(q, p)| p[((ex >> q & 1) | (ez >> q & 1) << 1) as usize]).product()
    }
}

/// Masks of a logical class representative.
pub fn logical_masks(layout: &CodeLayout, class: usize) -> (u64, u64) {
    let (lx, _) = layout.logical_x_masks();
    let (_, lz) = layout.logical_z_masks();
    (if class & 1 == 1 { lx } else { 0 }, if class & 2 == 2 { lz } else { 0 })
}

pub fn class_index(p: Pauli1) -> usize {
    let (x, z) = p.bits();
    x as usize | (z as usize) << 1
}

pub fn class_label(class: usize) -> Pauli1 {
    Pauli1::from_bits(class & 1 == 1, class & 2 == 2)
}

/// Linear syndrome inverse: one fixed Pauli per syndrome bit, combined by XOR.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PureErrors {
    basis: Vec<(u64, u64)>,
}

impl PureErrors {
    pub fn new(layout: &CodeLayout) -> Result<Self> {
        let g = layout.n_ancillas();
        // eliminate over single-qubit X and Z generators, tracking which Pauli gives each row
        let mut rows: Vec<(u64, (u64, u64))> = Vec::new();
        for q in 0..layout.n_data() {
            for (x, z) in [(1u64 << q, 0), (0, 1u64 << q)] {
                let mut s = layout.syndrome_masks(x, z);
                let mut p = (x, z);
                for &(rs, (rx, rz)) in &rows {
                    let pivot = 63 - rs.leading_zeros();
                    if s >> pivot & 1 == 1 {
                        s ^= rs;
                        p = (p.0 ^ rx, p.1 ^ rz);
                    }
                }
                if s != 0 {
                    rows.push((s, p));
                    rows.sort_by_key(|r| std::cmp::Reverse(r.0));
                }
            }
        }
        if rows.len() != g {
            return Err(LaceError::Layout("stabilizer syndromes are not independent".into()));
        }
        // back-substitute to unit syndromes
        let mut basis = vec![(0u64, 0u64); g];
        for a in 0..g {
            let (mut s, mut p) = (1u64 << a, (0u64, 0u64));
            for &(rs, (rx, rz)) in &rows {
                let pivot = 63 - rs.leading_zeros();
                if s >> pivot & 1 == 1 {
                    s ^= rs;
                    p = (p.0 ^ rx, p.1 ^ rz);
                }
            }
            debug_assert_eq!(s, 0);
            basis[a] = p;
        }
        Ok(Self { basis })
    }

    pub fn get(&self, syndrome: u64) -> (u64, u64) {
        self.basis
            .iter()
            .enumerate()
            .filter(|(a, _)| syndrome >> a & 1 == 1)
            .fold((0, 0), |(x, z), (_, &(bx, bz))| (x ^ bx, z ^ bz))
    }
}

/// Syndrome and logical class of an arbitrary Pauli, classes taken relative to the pure
/// error of its syndrome.
#[derive(Clone, Debug)]
pub struct CodeMaps {
    pub layout: CodeLayout,
    pub pure: PureErrors,
}

impl CodeMaps {
    pub fn new(layout: &CodeLayout) -> Result<Self> {
        Ok(Self { layout: layout.clone(), pure: PureErrors::new(layout)? })
    }

    pub fn syndrome(&self, ex: u64, ez: u64) -> u64 {
        self.layout.syndrome_masks(ex, ez)
    }

    pub fn class_of(&self, ex: u64, ez: u64) -> usize {
        let (px, pz) = self.pure.get(self.syndrome(ex, ez));
        class_index(self.layout.logical_class_masks(ex ^ px, ez ^ pz))
    }

    /// Representative `T(s) · L` of logical class `class` for syndrome `s`.
    pub fn representative(&self, syndrome: u64, class: usize) -> (u64, u64) {
        let (px, pz) = self.pure.get(syndrome);
        let (lx, lz) = logical_masks(&self.layout, class);
        (px ^ lx, pz ^ lz)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub class: usize,
    /// Recovery Pauli `(x, z)`.
    pub recovery: (u64, u64),
    /// Coset probabilities, normalized to sum to one.
    pub coset_probs: [f64; 4],
}

/// Pick the most probable class, ties to the lowest index.
pub fn choose_class(probs: [f64; 4]) -> Result<usize> {
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() || probs.iter().any(|p| !p.is_finite()) {
        return Err(LaceError::DegenerateContraction(format!("coset probabilities {probs:?}")));
    }
    Ok(probs.iter().position(|&p| p >= max * (1.0 - TIE_TOLERANCE)).expect("maximum exists"))
}

pub(crate) fn finish(maps: &CodeMaps, syndrome: u64, probs: [f64; 4]) -> Result<Decoding> {
    let class = choose_class(probs)?;
    let total: f64 = probs.iter().sum();
    Ok(Decoding { class, recovery: maps.representative(syndrome, class), coset_probs: probs.map(|p| p / total) })
}

pub trait Decoder: Sync {
    fn maps(&self) -> &CodeMaps;
    fn decode(&self, syndrome: u64) -> Result<Decoding>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderConfig {
    BruteForce,
    Mps { chi: usize },
    Table,
}

impl DecoderConfig {
    /// The exact table when it fits in memory, otherwise MPS at `chi`.
    pub fn auto(layout: &CodeLayout, chi: usize) -> Self {
        if layout.n_ancillas() + 2 <= table::MAX_TABLE_BITS {
            Self::Table
        } else {
            Self::Mps { chi }
        }
    }

    pub fn build(&self, layout: &CodeLayout, prior: PauliPrior) -> Result<Box<dyn Decoder + Send>> {
        Ok(match *self {
            Self::BruteForce => Box::new(BruteForceDecoder::new(layout, prior)?),
            Self::Mps { chi } => Box::new(MpsDecoder::new(layout, prior, chi)?),
            Self::Table => Box::new(TableDecoder::new(layout, &prior)?),
        })
    }
}

/// [`logical_error_rate`] with the decoder prior set to i.i.d. depolarizing noise at the
/// source's average marginal rate.
pub fn logical_error_rate_with(
    layout: &CodeLayout,
    source: &ProbDist,
    config: &DecoderConfig,
    samples: usize,
    repeats: usize,
    seed: u64,
) -> Result<LogicalRate> {
    let prior = PauliPrior::depolarizing(layout.n_data(), source.mean_site_rate())?;
    let decoder = config.build(layout, prior)?;
    logical_error_rate(source, decoder.as_ref(), samples, repeats, seed)
}

/// Draw one data-qubit error from an indicator distribution: flagged qubits get X, Y or Z
/// uniformly.
pub fn sample_error<R: Rng + ?Sized>(sampler: &DistSampler, rng: &mut R) -> (u64, u64) {
    let flags = sampler.sample(rng);
    let (mut x, mut z) = (0u64, 0u64);
    let mut rest = flags;
    while rest != 0 {
        let q = rest.trailing_zeros();
        rest &= rest - 1;
        match rng.random_range(0..3u8) {
            0 => x |= 1 << q,
            1 => {
                x |= 1 << q;
                z |= 1 << q;
            }
            _ => z |= 1 << q,
        }
    }
    (x, z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalRate {
    /// Mean over repeats.
    pub rate: f64,
    /// Standard error of the mean over repeats.
    pub sigma: f64,
    pub per_repeat: Vec<f64>,
    pub samples: usize,
}

impl LogicalRate {
    pub fn interval(&self) -> (f64, f64) {
        (self.rate - 2.0 * self.sigma, self.rate + 2.0 * self.sigma)
    }
}

const CHUNK: usize = 1000;

/// Monte Carlo logical failure rate: `repeats` independent batches of `samples` errors
/// drawn from `source`, each decoded from its syndrome and counted as a failure when the
/// chosen class differs from the error's class. Each distinct syndrome is decoded once.
pub fn logical_error_rate(
    source: &ProbDist,
    decoder: &dyn Decoder,
    samples: usize,
    repeats: usize,
    seed: u64,
) -> Result<LogicalRate> {
    let maps = decoder.maps();
    if source.num_sites() != maps.layout.n_data() {
        return Err(LaceError::SizeMismatch { expected: maps.layout.n_data(), got: source.num_sites() });
    }
    if samples < 100 || repeats == 0 {
        return Err(LaceError::Config("need at least 100 samples and one repeat".into()));
    }
    let sampler = DistSampler::new(source)?;
    let chunks = samples.div_ceil(CHUNK);
    let jobs: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..chunks).map(move |c| (r, c))).collect();
    // (syndrome, class) of every draw, chunk by chunk
    let draws: Vec<Vec<(u64, usize)>> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let mut rng = stream(seed, &[domain::DECODE, r as u64, c as u64]);
            (0..CHUNK.min(samples - c * CHUNK))
                .map(|_| {
                    let (ex, ez) = sample_error(&sampler, &mut rng);
                    (maps.syndrome(ex, ez), maps.class_of(ex, ez))
                })
                .collect()
        })
        .collect();
    let mut unique: Vec<u64> = draws.iter().flatten().map(|d| d.0).collect();
    unique.sort_unstable();
    unique.dedup();
    let decoded: Vec<usize> = unique.par_iter().map(|&s| decoder.decode(s).map(|d| d.class)).collect::<Result<_>>()?;
    let lookup = |s: u64| decoded[unique.binary_search(&s).expect("decoded syndrome")];
    let failures: Vec<usize> =
        draws.iter().map(|chunk| chunk.iter().filter(|&&(s, class)| lookup(s) != class).count()).collect();
    let per_repeat: Vec<f64> = (0..repeats)
        .map(|r| failures[r * chunks..(r + 1) * chunks].iter().sum::<usize>() as f64 / samples as f64)
        .collect();
    let rate = per_repeat.iter().sum::<f64>() / repeats as f64;
    let sigma = if repeats > 1 {
        let var = per_repeat.iter().map(|v| (v - rate).powi(2)).sum::<f64>() / (repeats - 1) as f64;
        (var / repeats as f64).sqrt()
    } else {
        // single batch: binomial standard error
        (rate * (1.0 - rate) / samples as f64).sqrt()
    };
    Ok(LogicalRate { rate, sigma, per_repeat, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_errors_hit_unit_syndromes() {
        for (r, c) in [(2, 2), (3, 3), (4, 5)] {
            let l = CodeLayout::new(r, c).unwrap();
            let pe = PureErrors::new(&l).unwrap();
            for a in 0..l.n_ancillas() {
                let (x, z) = pe.get(1 << a);
                assert_eq!(l.syndrome_masks(x, z), 1 << a);
            }
        }
    }

    #[test]
    fn classes_of_logicals() {
        let l = CodeLayout::new(3, 3).unwrap();
        let maps = CodeMaps::new(&l).unwrap();
        for class in 0..4 {
            let (x, z) = logical_masks(&l, class);
            assert_eq!(maps.class_of(x, z), class);
            let (sx, sz) = l.stabilizer_element(0b1011_0110);
            assert_eq!(maps.class_of(x ^ sx, z ^ sz), class);
        }
    }

    #[test]
    fn tie_break_order() {
        assert_eq!(choose_class([0.25; 4]).unwrap(), 0);
        assert_eq!(choose_class([0.1, 0.3, 0.3, 0.3]).unwrap(), 1);
        assert_eq!(choose_class([0.1, 0.2, 0.35, 0.35]).unwrap(), 2);
        assert!(matches!(choose_class([0.0; 4]), Err(LaceError::DegenerateContraction(_))));
        assert_eq!(class_label(2), Pauli1::Z);
        assert_eq!(class_index(Pauli1::Y), 3);
    }
}
