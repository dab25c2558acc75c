//! Pauli-frame Monte Carlo simulation of noisy sequences.
//!
//! Frames are bit-sliced: each circuit qubit holds an `(x, z)` pair of u64 lanes,
//! one bit per shot. Errors are pushed through the ideal Clifford circuit, and the
//! outcome indicator of qubit `q` is its X frame bit after the inversion layer
//! XOR a measurement flip.
//!
//! In effective mode the configured distribution is the per-block distribution of
//! *observed* flips (the locally averaged channel the protocol learns). Each
//! nontrivial single-qubit Pauli flips a random product stabilizer state with
//! probability 2/3, so the simulator injects the matching "any error" distribution
//! and draws X/Y/Z per flagged site from the site policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford1q::group;
use crate::error::{LaceError, Result};
use crate::prob::{any_error_preimage, locally_average, DistSampler, ProbDist};
use crate::protocol::{generate_sequence, ExperimentPlan, Protocol, SequenceSpec, ShotArchive, ShotRecord, Step};
use crate::rng::{domain, stream};
use crate::tableau::Gate;

/// Relative weights of X, Y, Z on a site flagged as erroneous.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitePolicy {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for SitePolicy {
    fn default() -> Self {
        Self { x: 1.0, y: 1.0, z: 1.0 }
    }
}

impl SitePolicy {
    fn validate(&self) -> Result<()> {
        let ok = [self.x, self.y, self.z].iter().all(|w| w.is_finite() && *w >= 0.0) && self.x + self.y + self.z > 0.0;
        if ok {
            Ok(())
        } else {
            Err(LaceError::Config("site policy weights must be nonnegative with positive sum".into()))
        }
    }

    /// Draw `(x, z)` bits of a nontrivial Pauli.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, bool) {
        let u = rng.random::<f64>() * (self.x + self.y + self.z);
        if u < self.x {
            (true, false)
        } else if u < self.x + self.y {
            (true, true)
        } else {
            (false, true)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub pair: (usize, usize),
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    /// A distribution of observed data-qubit flips applied once per two-round block.
    Effective {
        distribution: ProbDist,
        #[serde(default)]
        policy: SitePolicy,
    },
    /// Depolarizing noise after every gate of the stabilizer round and the Pauli layer.
    GateLevel {
        /// Per circuit qubit; empty means noiseless.
        #[serde(default)]
        one_qubit: Vec<f64>,
        #[serde(default)]
        two_qubit_default: f64,
        /// Overrides for specific couplers (unordered pair).
        #[serde(default)]
        two_qubit: Vec<PairRate>,
        /// Joint two-qubit depolarizing events after every CX layer.
        #[serde(default)]
        crosstalk: Vec<PairRate>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spam {
    /// Per circuit qubit; empty means none.
    #[serde(default)]
    pub prep_flip: Vec<f64>,
    #[serde(default)]
    pub meas_flip: Vec<f64>,
}

impl Spam {
    pub fn uniform(n_qubits: usize, prep: f64, meas: f64) -> Self {
        Self { prep_flip: vec![prep; n_qubits], meas_flip: vec![meas; n_qubits] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(flatten)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub spam: Spam,
}

fn check_rate(r: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(LaceError::Config(format!("{what} rate {r} outside [0,1]")))
    }
}

impl NoiseConfig {
    pub fn effective(distribution: ProbDist) -> Self {
        Self { mode: NoiseMode::Effective { distribution, policy: SitePolicy::default() }, spam: Spam::default() }
    }

    pub fn noiseless_gate_level() -> Self {
        Self {
            mode: NoiseMode::GateLevel {
                one_qubit: vec![],
                two_qubit_default: 0.0,
                two_qubit: vec![],
                crosstalk: vec![],
            },
            spam: Spam::default(),
        }
    }

    pub fn with_spam(mut self, spam: Spam) -> Self {
        self.spam = spam;
        self
    }

    pub fn validate(&self, protocol: &Protocol) -> Result<()> {
        let nq = protocol.n_qubits();
        for v in [&self.spam.prep_flip, &self.spam.meas_flip] {
            if !v.is_empty() && v.len() != nq {
                return Err(LaceError::Config(format!("SPAM list has {} entries for {nq} qubits", v.len())));
            }
            v.iter().try_for_each(|&r| check_rate(r, "SPAM"))?;
        }
        match &self.mode {
            NoiseMode::Effective { distribution, policy } => {
                if distribution.num_sites() != protocol.n_data() {
                    return Err(LaceError::Config(format!(
                        "effective distribution has {} sites, layout has {} data qubits",
                        distribution.num_sites(),
                        protocol.n_data()
                    )));
                }
                policy.validate()
            }
            NoiseMode::GateLevel { one_qubit, two_qubit_default, two_qubit, crosstalk } => {
                if !one_qubit.is_empty() && one_qubit.len() != nq {
                    return Err(LaceError::Config(format!(
                        "one-qubit list has {} entries for {nq} qubits",
                        one_qubit.len()
                    )));
                }
                one_qubit.iter().try_for_each(|&r| check_rate(r, "one-qubit"))?;
                check_rate(*two_qubit_default, "two-qubit")?;
                for pr in two_qubit.iter().chain(crosstalk) {
                    check_rate(pr.rate, "pair")?;
                    if pr.pair.0 >= nq || pr.pair.1 >= nq || pr.pair.0 == pr.pair.1 {
                        return Err(LaceError::Config(format!("bad qubit pair {:?}", pr.pair)));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo { samples: usize },
}

/// Per-block locally averaged channel on the data qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub distribution: ProbDist,
    pub provenance: Provenance,
}

enum Injector {
    Effective { sampler: DistSampler, policy: SitePolicy },
    GateLevel { one_qubit: Vec<f64>, two_qubit: Vec<Vec<f64>>, crosstalk: Vec<PairRate> },
}

/// Noise prepared for repeated simulation.
pub struct Simulator<'a> {
    protocol: &'a Protocol,
    injector: Injector,
    prep: Vec<f64>,
    meas: Vec<f64>,
}

/// Bit-sliced Pauli frame over all circuit qubits.
struct Frame {
    x: Vec<u64>,
    z: Vec<u64>,
}

impl Frame {
    fn new(n: usize) -> Self {
        Self { x: vec![0; n], z: vec![0; n] }
    }

    #[inline]
    fn gate(&mut self, g: Gate) {
        match g {
            Gate::H(q) => std::mem::swap(&mut self.x[q], &mut self.z[q]),
            Gate::CX(c, t) => {
                self.x[t] ^= self.x[c];
                self.z[c] ^= self.z[t];
            }
            // S maps X→Y, Z→Z: frame x unchanged, z ^= x
            Gate::S(q) | Gate::Sdg(q) => self.z[q] ^= self.x[q],
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
        }
    }

    #[inline]
    fn cliffords(&mut self, cs: &[u8]) {
        let g = group();
        for (q, &c) in cs.iter().enumerate() {
            let (x, z) = g[c as usize].map_frame(self.x[q], self.z[q]);
            self.x[q] = x;
            self.z[q] = z;
        }
    }

    #[inline]
    fn flip(&mut self, q: usize, lane: u32, (x, z): (bool, bool)) {
        self.x[q] ^= (x as u64) << lane;
        self.z[q] ^= (z as u64) << lane;
    }
}

fn bernoulli_lanes(rng: &mut ChaCha8Rng, p: f64, lanes: u32) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    (0..lanes).fold(0, |w, l| w | ((rng.random::<f64>() < p) as u64) << l)
}

fn lanes_of(mut mask: u64) -> impl Iterator<Item = u32> {
    std::iter::from_fn(move || {
        (mask != 0).then(|| {
            let l = mask.trailing_zeros();
            mask &= mask - 1;
            l
        })
    })
}

#[inline]
fn random_two_qubit(rng: &mut ChaCha8Rng) -> [(bool, bool); 2] {
    let k = rng.random_range(1..16u8);
    [((k & 1) != 0, (k & 2) != 0), ((k & 4) != 0, (k & 8) != 0)]
}

#[inline]
fn random_one_qubit(rng: &mut ChaCha8Rng) -> (bool, bool) {
    let k = rng.random_range(1..4u8);
    ((k & 1) != 0, (k & 2) != 0)
}

impl<'a> Simulator<'a> {
    pub fn new(protocol: &'a Protocol, noise: &NoiseConfig) -> Result<Self> {
        noise.validate(protocol)?;
        let nq = protocol.n_qubits();
        let injector = match &noise.mode {
            NoiseMode::Effective { distribution, policy } => {
                let any = any_error_preimage(distribution)?;
                Injector::Effective { sampler: any.sampler()?, policy: *policy }
            }
            NoiseMode::GateLevel { one_qubit, two_qubit_default, two_qubit, crosstalk } => {
                let mut table = vec![vec![*two_qubit_default; nq]; nq];
                for pr in two_qubit {
                    table[pr.pair.0][pr.pair.1] = pr.rate;
                    table[pr.pair.1][pr.pair.0] = pr.rate;
                }
                let one = if one_qubit.is_empty() { vec![0.0; nq] } else { one_qubit.clone() };
                Injector::GateLevel { one_qubit: one, two_qubit: table, crosstalk: crosstalk.clone() }
            }
        };
        let or_zero = |v: &Vec<f64>| if v.is_empty() { vec![0.0; nq] } else { v.clone() };
        Ok(Self { protocol, injector, prep: or_zero(&noise.spam.prep_flip), meas: or_zero(&noise.spam.meas_flip) })
    }

    fn noisy_round(&self, frame: &mut Frame, rng: &mut ChaCha8Rng, lanes: u32) {
        let Injector::GateLevel { one_qubit, two_qubit, crosstalk } = &self.injector else {
            for &g in self.protocol.round.gates() {
                frame.gate(g);
            }
            return;
        };
        for layer in &self.protocol.round.layers {
            let mut has_cx = false;
            for &g in layer {
                frame.gate(g);
            }
            for &g in layer {
                match g {
                    Gate::CX(c, t) => {
                        has_cx = true;
                        let p = two_qubit[c][t];
                        for lane in lanes_of(bernoulli_lanes(rng, p, lanes)) {
                            let [a, b] = random_two_qubit(rng);
                            frame.flip(c, lane, a);
                            frame.flip(t, lane, b);
                        }
                    }
                    other => {
                        let q = other.qubits()[0];
                        let p = one_qubit[q];
                        for lane in lanes_of(bernoulli_lanes(rng, p, lanes)) {
                            let e = random_one_qubit(rng);
                            frame.flip(q, lane, e);
                        }
                    }
                }
            }
            if has_cx {
                for pr in crosstalk {
                    for lane in lanes_of(bernoulli_lanes(rng, pr.rate, lanes)) {
                        let [a, b] = random_two_qubit(rng);
                        frame.flip(pr.pair.0, lane, a);
                        frame.flip(pr.pair.1, lane, b);
                    }
                }
            }
        }
    }

    fn pauli_layer_noise(&self, frame: &mut Frame, rng: &mut ChaCha8Rng, lanes: u32) {
        if let Injector::GateLevel { one_qubit, .. } = &self.injector {
            for (q, &p) in one_qubit.iter().enumerate() {
                for lane in lanes_of(bernoulli_lanes(rng, p, lanes)) {
                    let e = random_one_qubit(rng);
                    frame.flip(q, lane, e);
                }
            }
        }
    }

    fn block_end(&self, frame: &mut Frame, rng: &mut ChaCha8Rng, lanes: u32) {
        if let Injector::Effective { sampler, policy } = &self.injector {
            for lane in 0..lanes {
                let mut w = sampler.sample(rng);
                while w != 0 {
                    let q = w.trailing_zeros() as usize;
                    frame.flip(q, lane, policy.draw(rng));
                    w &= w - 1;
                }
            }
        }
    }

    /// Outcome indicator words of up to 64 shots of `spec`.
    fn run_lanes(&self, spec: &SequenceSpec, seed: u64, word_index: u64, lanes: u32) -> Vec<u64> {
        let nq = self.protocol.n_qubits();
        let mut rng = stream(seed, &[domain::SHOTS, spec.id, word_index]);
        let mut spam = stream(seed, &[domain::SPAM, spec.id, word_index]);
        let mut frame = Frame::new(nq);
        for q in 0..nq {
            frame.x[q] = bernoulli_lanes(&mut spam, self.prep[q], lanes);
        }
        for step in spec.steps() {
            match step {
                Step::Cliffords(cs) => frame.cliffords(cs),
                Step::Round => self.noisy_round(&mut frame, &mut rng, lanes),
                Step::Paulis(_) => self.pauli_layer_noise(&mut frame, &mut rng, lanes),
                Step::BlockEnd => self.block_end(&mut frame, &mut rng, lanes),
            }
        }
        frame.cliffords(&spec.inversion);
        let mut words = vec![0u64; lanes as usize];
        for q in 0..nq {
            let mut bits = frame.x[q] ^ bernoulli_lanes(&mut spam, self.meas[q], lanes);
            while bits != 0 {
                let l = bits.trailing_zeros() as usize;
                words[l] |= 1 << q;
                bits &= bits - 1;
            }
        }
        words
    }

    /// Simulate `shots` repetitions of `spec`. Shot words are drawn in groups of 64 from
    /// streams keyed by `(seed, sequence id, group)`.
    pub fn run_sequence(&self, spec: &SequenceSpec, shots: usize, seed: u64) -> Result<ShotRecord> {
        if spec.n_qubits != self.protocol.n_qubits() || spec.n_data != self.protocol.n_data() {
            return Err(LaceError::Config("sequence was built for a different layout".into()));
        }
        if self.protocol.n_qubits() > 64 {
            return Err(LaceError::Size("shot words hold at most 64 circuit qubits".into()));
        }
        let mut words = Vec::with_capacity(shots);
        for (k, start) in (0..shots).step_by(64).enumerate() {
            let lanes = (shots - start).min(64) as u32;
            words.extend(self.run_lanes(spec, seed, k as u64, lanes));
        }
        Ok(ShotRecord { sequence_id: spec.id, m: spec.m, words })
    }

    /// Generate and run every sequence of `plan`; sequences run in parallel, output in id order.
    pub fn run_plan(&self, plan: &ExperimentPlan) -> Result<ShotArchive> {
        plan.validate()?;
        let seed = plan.master_seed;
        let records = plan
            .sequences()
            .into_par_iter()
            .map(|(id, m)| {
                let spec = generate_sequence(self.protocol, m, seed, id)?;
                self.run_sequence(&spec, plan.shots, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShotArchive {
            n_qubits: self.protocol.n_qubits(),
            n_data: self.protocol.n_data(),
            shots: plan.shots,
            records,
        })
    }

    /// Data-qubit "any error" words after one noisy block `round · P · round` starting from
    /// an error-free frame (gate-level mode).
    fn block_errors(&self, seed: u64, word_index: u64, lanes: u32) -> Vec<u64> {
        let nq = self.protocol.n_qubits();
        let nd = self.protocol.n_data();
        let mut rng = stream(seed, &[domain::TRUTH, word_index]);
        let mut frame = Frame::new(nq);
        self.noisy_round(&mut frame, &mut rng, lanes);
        self.pauli_layer_noise(&mut frame, &mut rng, lanes);
        self.noisy_round(&mut frame, &mut rng, lanes);
        let mut words = vec![0u64; lanes as usize];
        for q in 0..nd {
            let mut bits = frame.x[q] | frame.z[q];
            while bits != 0 {
                let l = bits.trailing_zeros() as usize;
                words[l] |= 1 << q;
                bits &= bits - 1;
            }
        }
        words
    }
}

/// The channel the protocol should recover for `noise`.
///
/// Effective mode echoes the configured distribution. Gate-level mode histograms
/// `oracle_shots` samples of the data errors left by one block, then applies local
/// averaging (each flagged site observed with probability 2/3).
pub fn effective_truth(
    protocol: &Protocol,
    noise: &NoiseConfig,
    oracle_shots: usize,
    seed: u64,
) -> Result<GroundTruth> {
    noise.validate(protocol)?;
    match &noise.mode {
        NoiseMode::Effective { distribution, .. } => {
            Ok(GroundTruth { distribution: distribution.clone(), provenance: Provenance::Exact })
        }
        NoiseMode::GateLevel { .. } => {
            let nd = protocol.n_data();
            crate::prob::MAX_SITES.checked_sub(nd).ok_or_else(|| LaceError::Size(format!("{nd} data qubits")))?;
            if oracle_shots == 0 {
                return Err(LaceError::Config("oracle shot count must be positive".into()));
            }
            let sim = Simulator::new(protocol, noise)?;
            let groups: Vec<usize> = (0..oracle_shots).step_by(64).collect();
            let counts = groups
                .par_iter()
                .enumerate()
                .fold(
                    || vec![0u64; 1 << nd],
                    |mut acc, (k, &start)| {
                        let lanes = (oracle_shots - start).min(64) as u32;
                        for w in sim.block_errors(seed, k as u64, lanes) {
                            acc[w as usize] += 1;
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![0u64; 1 << nd],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                );
            let any = ProbDist::new(nd, counts.iter().map(|&c| c as f64 / oracle_shots as f64).collect())?;
            Ok(GroundTruth {
                distribution: locally_average(&any),
                provenance: Provenance::MonteCarlo { samples: oracle_shots },
            })
        }
    }
}
