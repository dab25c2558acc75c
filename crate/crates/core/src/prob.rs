//! Dense distributions over n-bit error-indicator strings and their
//! Walsh–Hadamard images.
//!
//! Convention: `W[i, j] = (-1)^{popcount(i & j)}`. The forward transform is
//! unnormalized (so `λ₀ = Σp = 1`) and the inverse carries the `1/2ⁿ`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::pauli::BitString;

/// Largest site count for dense arrays (2²⁶ reals = 512 MiB).
pub const MAX_SITES: usize = 26;

const NORM_TOL: f64 = 1e-9;
const PAR_THRESHOLD: usize = 1 << 16;

fn check_sites(n: usize) -> Result<()> {
    if n > MAX_SITES {
        Err(LaceError::Size(format!("{n} sites exceeds the dense cap of {MAX_SITES}")))
    } else {
        Ok(())
    }
}

fn sites_of_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(LaceError::Size(format!("length {len} is not a power of two")));
    }
    let n = len.trailing_zeros() as usize;
    check_sites(n)?;
    Ok(n)
}

/// Probability distribution over `n`-bit strings; index 0 is "no error anywhere".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbDist {
    n: usize,
    values: Vec<f64>,
}

/// Walsh–Hadamard image of a distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueVector {
    n: usize,
    values: Vec<f64>,
}

impl ProbDist {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_sites(n)?;
        if values.len() != 1 << n {
            return Err(LaceError::SizeMismatch { expected: 1 << n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LaceError::NonFinite);
        }
        if let Some(v) = values.iter().find(|&&v| v < 0.0) {
            return Err(LaceError::Data(format!("negative probability {v}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(LaceError::Data(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { n, values })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(n: usize, mut values: Vec<f64>) -> Result<Self> {
        let total: f64 = values.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(LaceError::Data("weights have no positive finite mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(n, values)
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), 1 << n);
        Self { n, values }
    }

    /// Point mass on `x`.
    pub fn delta(n: usize, x: u64) -> Result<Self> {
        check_sites(n)?;
        if x >> n != 0 {
            return Err(LaceError::Size(format!("outcome {x} does not fit in {n} sites")));
        }
        let mut values = vec![0.0; 1 << n];
        values[x as usize] = 1.0;
        Ok(Self { n, values })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_sites(n)?;
        Ok(Self { n, values: vec![1.0 / (1u64 << n) as f64; 1 << n] })
    }

    /// Independent sites with the given error rates.
    pub fn product(rates: &[f64]) -> Result<Self> {
        let n = rates.len();
        check_sites(n)?;
        let mut values = vec![1.0; 1 << n];
        for (k, &q) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(LaceError::Config(format!("rate {q} outside [0,1]")));
            }
            for (x, v) in values.iter_mut().enumerate() {
                *v *= if (x >> k) & 1 == 1 { q } else { 1.0 - q };
            }
        }
        Ok(Self { n, values })
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn prob(&self, x: BitString) -> f64 {
        self.values[x.bits() as usize]
    }

    /// Marginal error probability of every site.
    pub fn site_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.n];
        for (x, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut bits = x;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                rates[k] += v;
                bits &= bits - 1;
            }
        }
        rates
    }

    pub fn mean_site_rate(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.site_rates().iter().sum::<f64>() / self.n as f64
    }

    /// Total variation distance.
    pub fn tvd(&self, other: &ProbDist) -> Result<f64> {
        same_size(self.n, other.n)?;
        Ok(0.5 * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Little-endian binary form: u32 site count, then 2ⁿ f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 4];
        r.read_exact(&mut head)?;
        let n = u32::from_le_bytes(head) as usize;
        check_sites(n)?;
        let mut buf = vec![0u8; 8 << n];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Self::new(n, values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ProbDist = serde_json::from_str(s)?;
        Self::new(raw.n, raw.values)
    }

    /// Alias-table sampler over outcomes.
    pub fn sampler(&self) -> Result<DistSampler> {
        DistSampler::new(self)
    }
}

impl EigenvalueVector {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_sites(n)?;
        if values.len() != 1 << n {
            return Err(LaceError::SizeMismatch { expected: 1 << n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LaceError::NonFinite);
        }
        Ok(Self { n, values })
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Eigenvalue of the subset `s` (bit mask).
    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    /// Marginal distribution on `subset`, read off the eigenvalues whose support
    /// lies inside it: cost `O(2^|subset|)` instead of `O(2ⁿ)`.
    pub fn marginal(&self, subset: &[usize]) -> Result<ProbDist> {
        check_subset(self.n, subset)?;
        let k = subset.len();
        let mut vals = vec![0.0; 1 << k];
        for (local, v) in vals.iter_mut().enumerate() {
            let mut global = 0usize;
            for (j, &s) in subset.iter().enumerate() {
                if (local >> j) & 1 == 1 {
                    global |= 1 << s;
                }
            }
            *v = self.values[global];
        }
        let p = wht_inverse_raw(vals)?;
        Ok(ProbDist::from_raw(k, p.into_iter().map(|v| v.max(0.0)).collect()).renormalized())
    }
}

impl ProbDist {
    fn renormalized(mut self) -> Self {
        let total: f64 = self.values.iter().sum();
        if total > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= total);
        }
        self
    }
}

fn same_size(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(LaceError::SizeMismatch { expected: a, got: b })
    } else {
        Ok(())
    }
}

fn check_subset(n: usize, subset: &[usize]) -> Result<()> {
    let mut seen = 0u64;
    for &s in subset {
        if s >= n {
            return Err(LaceError::InvalidSite(format!("site {s} out of range for {n} sites")));
        }
        if seen >> s & 1 == 1 {
            return Err(LaceError::InvalidSite(format!("duplicate site {s}")));
        }
        seen |= 1 << s;
    }
    Ok(())
}

/// In-place unnormalized fast Walsh–Hadamard transform (`n·2ⁿ` additions).
///
/// Each butterfly is evaluated in the same order whether or not the stage runs in
/// parallel, so results are bit-identical to the serial transform.
pub fn fwht_in_place(data: &mut [f64]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        let butterfly = |block: &mut [f64]| {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        };
        if len >= PAR_THRESHOLD {
            if 2 * h <= len / 64 {
                data.par_chunks_mut(2 * h).for_each(butterfly);
            } else {
                data.chunks_mut(2 * h).for_each(|block| {
                    let (lo, hi) = block.split_at_mut(h);
                    lo.par_iter_mut().zip(hi.par_iter_mut()).for_each(|(a, b)| {
                        let (x, y) = (*a, *b);
                        *a = x + y;
                        *b = x - y;
                    });
                });
            }
        } else {
            data.chunks_mut(2 * h).for_each(butterfly);
        }
        h *= 2;
    }
}

/// `λ = W p`.
pub fn wht_forward(p: &ProbDist) -> Result<EigenvalueVector> {
    let mut v = p.values.clone();
    fwht_in_place(&mut v);
    Ok(EigenvalueVector { n: p.n, values: v })
}

/// `(1/2ⁿ) W λ`; the result may leave the simplex.
pub fn wht_inverse(l: &EigenvalueVector) -> Result<Vec<f64>> {
    wht_inverse_raw(l.values.clone())
}

pub(crate) fn wht_inverse_raw(mut v: Vec<f64>) -> Result<Vec<f64>> {
    sites_of_len(v.len())?;
    fwht_in_place(&mut v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(v)
}

/// Forward transform of an arbitrary real array of power-of-two length.
pub fn wht_forward_raw(mut v: Vec<f64>) -> Result<Vec<f64>> {
    sites_of_len(v.len())?;
    fwht_in_place(&mut v);
    Ok(v)
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Result<ProbDist> {
    let n = sites_of_len(v.len())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LaceError::NonFinite);
    }
    let (values, _) = project_simplex_values(v);
    Ok(ProbDist { n, values })
}

/// Projection of any finite vector; also returns the threshold `τ` subtracted from kept entries.
pub fn project_simplex_values(v: &[f64]) -> (Vec<f64>, f64) {
    // Fast path: already a distribution.
    let total: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (total - 1.0).abs() <= 1e-15 * v.len() as f64 {
        return (v.to_vec(), 0.0);
    }
    let mut sorted = v.to_vec();
    sorted.par_sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    (v.iter().map(|&x| (x - tau).max(0.0)).collect(), tau)
}

/// Distribution of the XOR of independent draws from `p` and `q`.
pub fn xor_convolve(p: &ProbDist, q: &ProbDist) -> Result<ProbDist> {
    let raw = xor_convolve_raw(p.values(), q.values())?;
    Ok(ProbDist { n: p.n, values: raw.into_iter().map(|v| v.max(0.0)).collect() }.renormalized())
}

/// `W⁻¹(Wp ⊙ Wq)` without clipping.
pub fn xor_convolve_raw(p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    same_size(p.len(), q.len())?;
    let mut a = wht_forward_raw(p.to_vec())?;
    let b = wht_forward_raw(q.to_vec())?;
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    wht_inverse_raw(a)
}

/// Sum out every site not in `subset`; output bit `k` is input site `subset[k]`.
pub fn marginalize(p: &ProbDist, subset: &[usize]) -> Result<ProbDist> {
    check_subset(p.n, subset)?;
    let k = subset.len();
    let mut out = vec![0.0; 1 << k];
    if subset.iter().enumerate().all(|(j, &s)| j == s) {
        // Leading sites: contiguous reduction.
        let mask = (1usize << k) - 1;
        for (x, &v) in p.values.iter().enumerate() {
            out[x & mask] += v;
        }
    } else {
        for (x, &v) in p.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut y = 0usize;
            for (j, &s) in subset.iter().enumerate() {
                y |= ((x >> s) & 1) << j;
            }
            out[y] += v;
        }
    }
    Ok(ProbDist { n: k, values: out })
}

/// Conditional distribution over `targets` given fixed values on `given`.
pub fn conditional(p: &ProbDist, targets: &[usize], given: &[(usize, bool)]) -> Result<ProbDist> {
    let mut all: Vec<usize> = targets.to_vec();
    all.extend(given.iter().map(|g| g.0));
    check_subset(p.n, &all)?;
    let joint = marginalize(p, &all)?;
    conditional_from_joint(&joint, targets.len(), given.iter().map(|g| g.1))
}

/// Conditional of the leading `k` sites of `joint` given the remaining sites take `values`.
pub(crate) fn conditional_from_joint(
    joint: &ProbDist,
    k: usize,
    values: impl Iterator<Item = bool>,
) -> Result<ProbDist> {
    let mut given_bits = 0usize;
    for (j, v) in values.enumerate() {
        if v {
            given_bits |= 1 << (k + j);
        }
    }
    let out: Vec<f64> = (0..1usize << k).map(|x| joint.values[x | given_bits]).collect();
    let mass: f64 = out.iter().sum();
    if mass <= 0.0 {
        return Err(LaceError::DegenerateEvent("conditioning event has zero probability".into()));
    }
    Ok(ProbDist { n: k, values: out.into_iter().map(|v| v / mass).collect() })
}

/// Apply the same 2×2 matrix `[[a, b], [c, d]]` to every site of a dense array:
/// `(v₀, v₁) ↦ (a·v₀ + b·v₁, c·v₀ + d·v₁)` where `v₀`/`v₁` differ only in that site.
pub fn apply_site_matrix(v: &mut [f64], m: [[f64; 2]; 2]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x0, *x1);
                *x0 = m[0][0] * a + m[0][1] * b;
                *x1 = m[1][0] * a + m[1][1] * b;
            }
        }
        h *= 2;
    }
}

/// Chance that a uniformly random X/Y/Z error on a site flips a computational-basis
/// measurement after single-qubit Clifford averaging.
pub const LOCAL_DETECTION: f64 = 2.0 / 3.0;

/// Map a distribution of "any Pauli error" indicators (uniform X/Y/Z per flagged site)
/// to the locally averaged indicator distribution the protocol observes: each flagged
/// site is seen with probability 2/3.
pub fn locally_average(any_error: &ProbDist) -> ProbDist {
    let k = LOCAL_DETECTION;
    let mut v = any_error.values.clone();
    apply_site_matrix(&mut v, [[1.0, 1.0 - k], [0.0, k]]);
    ProbDist { n: any_error.n, values: v.into_iter().map(|x| x.max(0.0)).collect() }.renormalized()
}

/// Inverse of [`locally_average`]. Errors if the preimage leaves the simplex by more than `1e-12`.
pub fn any_error_preimage(averaged: &ProbDist) -> Result<ProbDist> {
    let k = LOCAL_DETECTION;
    let mut v = averaged.values.clone();
    apply_site_matrix(&mut v, [[1.0, -(1.0 - k) / k], [0.0, 1.0 / k]]);
    if let Some(min) = v.iter().copied().reduce(f64::min) {
        if min < -1e-12 {
            return Err(LaceError::Config(format!(
                "distribution is not realizable by uniform single-site Pauli errors (entry {min:.3e})"
            )));
        }
    }
    Ok(ProbDist { n: averaged.n, values: v.into_iter().map(|x| x.max(0.0)).collect() }.renormalized())
}

/// O(1) sampler over the outcomes of a [`ProbDist`].
#[derive(Clone, Debug)]
pub struct DistSampler {
    alias: Option<WeightedAliasIndex<f64>>,
    single: u64,
}

impl DistSampler {
    pub fn new(p: &ProbDist) -> Result<Self> {
        let nonzero: Vec<usize> = (0..p.values.len()).filter(|&i| p.values[i] > 0.0).collect();
        if nonzero.len() == 1 {
            return Ok(Self { alias: None, single: nonzero[0] as u64 });
        }
        let alias = WeightedAliasIndex::new(p.values.clone()).map_err(|e| LaceError::Data(format!("sampler: {e}")))?;
        Ok(Self { alias: Some(alias), single: 0 })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.alias {
            Some(a) => a.sample(rng) as u64,
            None => self.single,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn random_dist(n: usize, seed: u64) -> ProbDist {
        let mut rng = crate::rng::stream(seed, &[]);
        let w: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>()).collect();
        ProbDist::from_weights(n, w).unwrap()
    }

    /// Dense matrix-multiply oracle for W.
    fn w_dense(v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|i| v.iter().enumerate().map(|(j, x)| if (i & j).count_ones() % 2 == 0 { *x } else { -*x }).sum())
            .collect()
    }

    #[test]
    fn forward_examples() {
        let d = ProbDist::delta(3, 0).unwrap();
        assert!(wht_forward(&d).unwrap().values().iter().all(|&v| v == 1.0));
        let u = ProbDist::uniform(3).unwrap();
        let l = wht_forward(&u).unwrap();
        assert_eq!(l.values()[0], 1.0);
        assert!(l.values()[1..].iter().all(|&v| v.abs() < 1e-15));
        let p = ProbDist::new(2, vec![0.90, 0.05, 0.03, 0.02]).unwrap();
        let l = wht_forward(&p).unwrap();
        let oracle = w_dense(p.values());
        for (a, b) in l.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in l.values().iter().zip([1.00, 0.86, 0.90, 0.84]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        let l = EigenvalueVector::new(2, vec![1.0; 4]).unwrap();
        assert_eq!(wht_inverse(&l).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let l = EigenvalueVector::new(2, vec![1.0, 0.86, 0.90, 0.84]).unwrap();
        for (a, b) in wht_inverse(&l).unwrap().iter().zip([0.90, 0.05, 0.03, 0.02]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn size_cap() {
        assert!(ProbDist::uniform(27).is_err());
        assert!(wht_forward_raw(vec![0.0; 3]).is_err());
    }

    #[test]
    fn simplex_examples() {
        let p = project_simplex(&[0.7, 0.5]).unwrap();
        assert!((p.values()[0] - 0.6).abs() < 1e-15 && (p.values()[1] - 0.4).abs() < 1e-15);
        let p = project_simplex(&[1.2, -0.2]).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0]);
        let d = random_dist(3, 1);
        assert_eq!(project_simplex(d.values()).unwrap(), d);
        assert!(matches!(project_simplex(&[f64::NAN, 0.0]), Err(LaceError::NonFinite)));
    }

    #[test]
    fn simplex_projection_beats_random_simplex_points() {
        let mut rng = crate::rng::stream(11, &[]);
        let v: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 0.4 - 0.1).collect();
        let p = project_simplex(&v).unwrap();
        let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = dist(p.values());
        for s in 0..1000 {
            let q = random_dist(4, 100 + s);
            assert!(dist(q.values()) >= best - 1e-15);
        }
    }

    #[test]
    fn xor_examples() {
        let p = random_dist(3, 2);
        let d0 = ProbDist::delta(3, 0).unwrap();
        let c = xor_convolve(&p, &d0).unwrap();
        for (a, b) in c.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = xor_convolve(&ProbDist::delta(3, 0b101).unwrap(), &ProbDist::delta(3, 0b011).unwrap()).unwrap();
        assert!((c.values()[0b110] - 1.0).abs() < 1e-15);
        let q = ProbDist::new(1, vec![0.9, 0.1]).unwrap();
        let c = xor_convolve(&q, &q).unwrap();
        assert!((c.values()[0] - 0.82).abs() < 1e-15 && (c.values()[1] - 0.18).abs() < 1e-15);
        assert!(xor_convolve(&q, &p).is_err());
    }

    #[test]
    fn marginal_examples() {
        let p = ProbDist::new(2, vec![0.90, 0.05, 0.03, 0.02]).unwrap();
        let m = marginalize(&p, &[0]).unwrap();
        assert!((m.values()[0] - 0.93).abs() < 1e-15 && (m.values()[1] - 0.07).abs() < 1e-15);
        assert_eq!(marginalize(&p, &[0, 1]).unwrap(), p);
        let prod = ProbDist::product(&[0.1, 0.2, 0.3]).unwrap();
        let m = marginalize(&prod, &[2, 0]).unwrap();
        let expect = ProbDist::product(&[0.3, 0.1]).unwrap();
        assert!(m.tvd(&expect).unwrap() < 1e-15);
        assert!(marginalize(&p, &[0, 0]).is_err());
        assert!(marginalize(&p, &[2]).is_err());
        // eigenvalue route agrees
        let big = random_dist(5, 3);
        let l = wht_forward(&big).unwrap();
        let a = marginalize(&big, &[4, 1, 2]).unwrap();
        let b = l.marginal(&[4, 1, 2]).unwrap();
        assert!(a.tvd(&b).unwrap() < 1e-14);
    }

    #[test]
    fn conditional_examples() {
        let prod = ProbDist::product(&[0.1, 0.25]).unwrap();
        let c = conditional(&prod, &[1], &[(0, true)]).unwrap();
        assert!((c.values()[1] - 0.25).abs() < 1e-15);
        let d = ProbDist::delta(2, 0b01).unwrap();
        let c = conditional(&d, &[1], &[(0, true)]).unwrap();
        assert_eq!(c.values(), &[1.0, 0.0]);
        assert!(matches!(conditional(&d, &[1], &[(0, false)]), Err(LaceError::DegenerateEvent(_))));
        let p = ProbDist::new(2, vec![0.8, 0.05, 0.05, 0.1]).unwrap();
        let c = conditional(&p, &[1], &[(0, true)]).unwrap();
        assert!((c.values()[0] - 1.0 / 3.0).abs() < 1e-15 && (c.values()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(conditional(&p, &[0], &[(0, true)]).is_err());
    }

    #[test]
    fn local_averaging_round_trip() {
        let p = ProbDist::product(&[0.1, 0.2]).unwrap();
        let avg = locally_average(&p);
        let rates = avg.site_rates();
        assert!((rates[0] - 0.1 * 2.0 / 3.0).abs() < 1e-15);
        let back = any_error_preimage(&avg).unwrap();
        assert!(back.tvd(&p).unwrap() < 1e-15);
        // a pure flip on every site is not reachable by uniform Paulis
        assert!(any_error_preimage(&ProbDist::delta(2, 3).unwrap()).is_err());
    }

    #[test]
    fn binary_and_json_forms() {
        let p = random_dist(3, 4);
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], &3u32.to_le_bytes());
        assert_eq!(buf.len(), 4 + 8 * 8);
        assert_eq!(ProbDist::read_binary(&buf[..]).unwrap(), p);
        let s = p.to_json().unwrap();
        assert!(s.starts_with("{\"n\":3,\"values\":["));
        assert_eq!(ProbDist::from_json(&s).unwrap(), p);
    }

    #[test]
    fn sampler_matches_distribution() {
        let p = ProbDist::new(2, vec![0.5, 0.25, 0.0, 0.25]).unwrap();
        let s = p.sampler().unwrap();
        let mut rng = crate::rng::stream(5, &[]);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[s.sample(&mut rng) as usize] += 1;
        }
        assert_eq!(counts[2], 0);
        assert!((counts[0] as f64 / 40_000.0 - 0.5).abs() < 0.015);
        let d = ProbDist::delta(2, 3).unwrap().sampler().unwrap();
        assert_eq!(d.sample(&mut rng), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_and_convolution(n in 1usize..=12, seed in any::<u64>()) {
            let p = random_dist(n, seed);
            let l = wht_forward(&p).unwrap();
            let back = wht_inverse(&l).unwrap();
            for (a, b) in back.iter().zip(p.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let c = xor_convolve_raw(p.values(), p.values()).unwrap();
            let lc = wht_forward_raw(c).unwrap();
            for (a, b) in lc.iter().zip(l.values()) {
                prop_assert!((a - b * b).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_is_valid_and_idempotent(v in proptest::collection::vec(-1.0f64..2.0, 8)) {
            let p = project_simplex(&v).unwrap();
            prop_assert!(p.values().iter().all(|&x| x >= 0.0));
            prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let again = project_simplex(p.values()).unwrap();
            for (a, b) in again.values().iter().zip(p.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn marginals_commute(seed in any::<u64>()) {
            let p = random_dist(6, seed);
            let ab = marginalize(&p, &[5, 1, 3, 0]).unwrap();
            // sites 1 and 3 sit at positions 1 and 2 of `ab`
            let a_via = marginalize(&ab, &[1, 2]).unwrap();
            let a_direct = marginalize(&p, &[1, 3]).unwrap();
            prop_assert!(a_via.tvd(&a_direct).unwrap() < 1e-14);
        }
    }
}
