//! Randomized sequences, experiment plans, and shot records.
//!
//! A sequence of `m` blocks runs, on every circuit qubit,
//!
//! ```text
//! C₀ · [C_k · round · P_k · round]  (k = 1..m) · inversion
//! ```
//!
//! where `C` are uniformly random single-qubit Cliffords and `P` random Paulis. Two
//! rounds sandwiching a Pauli layer equal a Pauli layer, so the ideal circuit maps
//! `|0…0⟩` to a product state and a single-qubit inversion layer returns every
//! data qubit to its random target bit and every ancilla to `|0⟩`.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford1q::{find_inverter, group};
use crate::error::{LaceError, Result};
use crate::pauli::{Pauli1, PauliOp};
use crate::rng::{domain, stream};
use crate::surface::{stabilizer_prep_round, CircuitRound, CodeLayout};
use crate::tableau::conjugate_by_gate;

/// Layout plus its verified stabilizer-preparation round.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub layout: CodeLayout,
    pub round: CircuitRound,
}

impl Protocol {
    pub fn new(layout: CodeLayout) -> Self {
        let round = stabilizer_prep_round(&layout);
        Self { layout, round }
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    pub fn n_data(&self) -> usize {
        self.layout.n_data()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDraw {
    /// Index into [`crate::clifford1q::group`] per circuit qubit.
    pub cliffords: Vec<u8>,
    pub paulis: Vec<Pauli1>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub id: u64,
    pub m: usize,
    pub n_qubits: usize,
    pub n_data: usize,
    /// Target bit per circuit qubit; always 0 for ancillas.
    pub targets: Vec<bool>,
    pub initial_cliffords: Vec<u8>,
    pub blocks: Vec<BlockDraw>,
    pub inversion: Vec<u8>,
}

/// One step of the ideal circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<'a> {
    Cliffords(&'a [u8]),
    Round,
    Paulis(&'a [Pauli1]),
    /// Noise location closing each block (no-op in the ideal circuit).
    BlockEnd,
}

impl SequenceSpec {
    /// Steps before the inversion layer.
    pub fn steps(&self) -> Vec<Step<'_>> {
        let mut out = vec![Step::Cliffords(&self.initial_cliffords)];
        for b in &self.blocks {
            out.extend([
                Step::Cliffords(&b.cliffords),
                Step::Round,
                Step::Paulis(&b.paulis),
                Step::Round,
                Step::BlockEnd,
            ]);
        }
        out
    }

    /// Target bits of the data qubits as a word.
    pub fn target_word(&self) -> u64 {
        self.targets.iter().take(self.n_data).enumerate().fold(0, |w, (k, &t)| w | (t as u64) << k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn layer_rng(seed: u64, id: u64, layer: u64) -> rand_chacha::ChaCha8Rng {
    stream(seed, &[domain::SEQUENCE, id, layer])
}

const PAULIS: [Pauli1; 4] = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z];

/// Draw a sequence with `m` blocks. Every layer has its own stream keyed by
/// `(seed, id, layer)`, so specs do not depend on generation order.
pub fn generate_sequence(protocol: &Protocol, m: usize, seed: u64, id: u64) -> Result<SequenceSpec> {
    let nq = protocol.n_qubits();
    let nd = protocol.n_data();
    let cliffords = |layer: u64| -> Vec<u8> {
        let mut rng = layer_rng(seed, id, layer);
        (0..nq).map(|_| rng.random_range(0..24u8)).collect()
    };
    let mut rng = layer_rng(seed, id, 0);
    let targets = (0..nq).map(|q| q < nd && rng.random::<bool>()).collect();
    let blocks = (1..=m as u64)
        .map(|k| {
            let mut prng = layer_rng(seed, id, 2 * k + 1);
            BlockDraw {
                cliffords: cliffords(2 * k),
                paulis: (0..nq).map(|_| PAULIS[prng.random_range(0..4)]).collect(),
            }
        })
        .collect();
    let mut spec = SequenceSpec {
        id,
        m,
        n_qubits: nq,
        n_data: nd,
        targets,
        initial_cliffords: cliffords(1),
        blocks,
        inversion: Vec::new(),
    };
    spec.inversion = compute_inversion(protocol, &spec.steps(), &spec.targets)?;
    Ok(spec)
}

/// Per-qubit stabilizers `±P_q` of the state the steps prepare from `|0…0⟩`.
///
/// Errors if that state is not a product of single-qubit stabilizer states.
pub fn product_state(protocol: &Protocol, steps: &[Step<'_>]) -> Result<Vec<PauliOp>> {
    let nq = protocol.n_qubits();
    let mut gens: Vec<PauliOp> = (0..nq).map(|q| PauliOp::single(nq, q, Pauli1::Z)).collect();
    let g = group();
    for step in steps {
        match step {
            Step::Cliffords(cs) => {
                for (q, &c) in cs.iter().enumerate() {
                    for gate in g[c as usize].gates_on(q) {
                        gens.iter_mut().for_each(|s| conjugate_by_gate(s, gate));
                    }
                }
            }
            Step::Round => {
                for &gate in protocol.round.gates() {
                    gens.iter_mut().for_each(|s| conjugate_by_gate(s, gate));
                }
            }
            Step::Paulis(ps) => {
                for (q, &p) in ps.iter().enumerate() {
                    if p == Pauli1::I {
                        continue;
                    }
                    let op = PauliOp::single(nq, q, p);
                    for s in gens.iter_mut() {
                        if !s.commutes_with(&op) {
                            s.add_phase(2);
                        }
                    }
                }
            }
            Step::BlockEnd => {}
        }
    }
    reduce_to_single_qubit(gens)
}

/// Row-reduce commuting generators; a product state reduces to one weight-1 row per qubit.
fn reduce_to_single_qubit(mut rows: Vec<PauliOp>) -> Result<Vec<PauliOp>> {
    let nq = rows.len();
    let col = |p: &PauliOp, c: usize| if c.is_multiple_of(2) { p.x_bit(c / 2) } else { p.z_bit(c / 2) };
    let mut rank = 0;
    for c in 0..2 * nq {
        let Some(piv) = (rank..nq).find(|&r| col(&rows[r], c)) else { continue };
        rows.swap(rank, piv);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && col(row, c) {
                row.mul_assign_right(&pivot);
            }
        }
        rank += 1;
    }
    let mut out: Vec<Option<PauliOp>> = vec![None; nq];
    for row in rows {
        let support = row.support();
        if support.len() != 1 {
            return Err(LaceError::ProtocolStructure(format!(
                "state before inversion is entangled (stabilizer {row} has weight {})",
                support.len()
            )));
        }
        let q = support[0];
        let mut single = PauliOp::single(1, 0, row.get(q));
        if row.sign() < 0 {
            single.add_phase(2);
        }
        out[q] = Some(single);
    }
    out.into_iter()
        .enumerate()
        .map(|(q, s)| s.ok_or_else(|| LaceError::ProtocolStructure(format!("qubit {q} has no stabilizer"))))
        .collect()
}

/// Single-qubit Cliffords taking the prepared product state to `targets`.
pub fn compute_inversion(protocol: &Protocol, steps: &[Step<'_>], targets: &[bool]) -> Result<Vec<u8>> {
    let stabs = product_state(protocol, steps)?;
    stabs
        .iter()
        .zip(targets)
        .map(|(s, &t)| {
            find_inverter(s, t)
                .map(|i| i as u8)
                .ok_or_else(|| LaceError::ProtocolStructure(format!("no inverter for stabilizer {s}")))
        })
        .collect()
}

/// Outcome bits of the noiseless circuit including inversion (for checks).
pub fn ideal_outcome(protocol: &Protocol, spec: &SequenceSpec) -> Result<u64> {
    let mut steps = spec.steps();
    steps.push(Step::Cliffords(&spec.inversion));
    let stabs = product_state(protocol, &steps)?;
    let mut word = 0u64;
    for (q, s) in stabs.iter().enumerate() {
        if s.get(0) != Pauli1::Z {
            return Err(LaceError::ProtocolStructure(format!("qubit {q} does not end in a Z eigenstate")));
        }
        if s.sign() < 0 {
            word |= 1 << q;
        }
    }
    Ok(word)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub m_grid: Vec<usize>,
    /// Sequence count for each entry of `m_grid`.
    pub sequences_per_m: Vec<usize>,
    pub shots: usize,
    pub master_seed: u64,
}

pub const PAPER_M_GRID: [usize; 7] = [0, 1, 2, 3, 4, 6, 8];

impl ExperimentPlan {
    pub fn new(m_grid: Vec<usize>, sequences_per_m: usize, shots: usize, master_seed: u64) -> Result<Self> {
        let counts = vec![sequences_per_m; m_grid.len()];
        Self::with_counts(m_grid, counts, shots, master_seed)
    }

    pub fn with_counts(
        m_grid: Vec<usize>,
        sequences_per_m: Vec<usize>,
        shots: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let plan = Self { m_grid, sequences_per_m, shots, master_seed };
        plan.validate()?;
        Ok(plan)
    }

    /// `total` sequences spread over the grid as evenly as possible, small `m` first.
    pub fn with_total(m_grid: Vec<usize>, total: usize, shots: usize, master_seed: u64) -> Result<Self> {
        let k = m_grid.len().max(1);
        let counts = (0..m_grid.len()).map(|i| total / k + usize::from(i < total % k)).collect();
        Self::with_counts(m_grid, counts, shots, master_seed)
    }

    /// 1770 sequences of 2000 shots over m ∈ {0,1,2,3,4,6,8}.
    pub fn paper_scale(master_seed: u64) -> Self {
        Self::with_total(PAPER_M_GRID.to_vec(), 1770, 2000, master_seed).expect("valid")
    }

    /// 30 sequences per m, 2000 shots.
    pub fn desk_scale(master_seed: u64) -> Self {
        Self::new(PAPER_M_GRID.to_vec(), 30, 2000, master_seed).expect("valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() {
            return Err(LaceError::Config("empty m grid".into()));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) || self.m_grid[0] != 0 {
            return Err(LaceError::Config("m grid must be strictly increasing and start at 0".into()));
        }
        if self.sequences_per_m.len() != self.m_grid.len() {
            return Err(LaceError::Config("one sequence count per m required".into()));
        }
        if self.shots == 0 || self.sequences_per_m.contains(&0) {
            return Err(LaceError::Config("sequence and shot counts must be positive".into()));
        }
        Ok(())
    }

    pub fn total_sequences(&self) -> usize {
        self.sequences_per_m.iter().sum()
    }

    /// `(id, m)` of every sequence; ids are consecutive, grouped by `m`.
    pub fn sequences(&self) -> Vec<(u64, usize)> {
        let mut out = Vec::with_capacity(self.total_sequences());
        for (&m, &count) in self.m_grid.iter().zip(&self.sequences_per_m) {
            for _ in 0..count {
                out.push((out.len() as u64, m));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Measured shots of one sequence: bit `q` of each word is 1 iff circuit qubit `q`
/// disagreed with its target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub sequence_id: u64,
    pub m: usize,
    pub words: Vec<u64>,
}

impl ShotRecord {
    pub fn data_words(&self, n_data: usize) -> impl Iterator<Item = u64> + '_ {
        let mask = if n_data >= 64 { u64::MAX } else { (1u64 << n_data) - 1 };
        self.words.iter().map(move |w| w & mask)
    }
}

/// A batch of shot records sharing qubit and shot counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotArchive {
    pub n_qubits: usize,
    pub n_data: usize,
    pub shots: usize,
    pub records: Vec<ShotRecord>,
}

const MAGIC: &[u8; 4] = b"LACE";
const FORMAT_VERSION: u32 = 1;

impl ShotArchive {
    /// Binary form: `"LACE"`, then little-endian u32 version, qubit count, data-qubit count,
    /// shots per record and record count; each record is u64 sequence id, u32 m and
    /// `shots` u64 outcome words.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in
            [FORMAT_VERSION, self.n_qubits as u32, self.n_data as u32, self.shots as u32, self.records.len() as u32]
        {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(12 + 8 * self.shots);
        for r in &self.records {
            if r.words.len() != self.shots {
                return Err(LaceError::Data(format!(
                    "record {} has {} shots, expected {}",
                    r.sequence_id,
                    r.words.len(),
                    self.shots
                )));
            }
            buf.clear();
            buf.extend_from_slice(&r.sequence_id.to_le_bytes());
            buf.extend_from_slice(&(r.m as u32).to_le_bytes());
            for word in &r.words {
                buf.extend_from_slice(&word.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LaceError::Data("not a shot archive (bad magic)".into()));
        }
        let mut u32s = [0u32; 5];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, n_qubits, n_data, shots, count] = u32s.map(|v| v as usize);
        if version != FORMAT_VERSION as usize {
            return Err(LaceError::Data(format!("unsupported archive version {version}")));
        }
        if n_qubits > 64 || n_data > n_qubits {
            return Err(LaceError::Data(format!("bad qubit counts {n_data}/{n_qubits}")));
        }
        let mut records = Vec::with_capacity(count);
        let mut buf = vec![0u8; 12 + 8 * shots];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            let sequence_id = u64::from_le_bytes(buf[0..8].try_into().expect("8 bytes"));
            let m = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes")) as usize;
            let words = buf[12..].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            records.push(ShotRecord { sequence_id, m, words });
        }
        Ok(Self { n_qubits, n_data, shots, records })
    }

    /// CSV with one row per shot: `sequence_id, m, shot, q0, q1, …` over data qubits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["sequence_id".to_string(), "m".into(), "shot".into()];
        header.extend((0..self.n_data).map(|q| format!("q{q}")));
        out.write_record(&header)?;
        for r in &self.records {
            for (s, word) in r.data_words(self.n_data).enumerate() {
                let mut row = vec![r.sequence_id.to_string(), r.m.to_string(), s.to_string()];
                row.extend((0..self.n_data).map(|q| ((word >> q) & 1).to_string()));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Protocol {
        Protocol::new(CodeLayout::new(3, 3).unwrap())
    }

    #[test]
    fn block_structure() {
        let p = small();
        let s0 = generate_sequence(&p, 0, 1, 0).unwrap();
        assert!(s0.blocks.is_empty());
        assert_eq!(s0.steps().len(), 1);
        let s2 = generate_sequence(&p, 2, 1, 1).unwrap();
        let steps = s2.steps();
        assert_eq!(steps.iter().filter(|s| **s == Step::Round).count(), 4);
        assert_eq!(steps.iter().filter(|s| matches!(s, Step::Paulis(_))).count(), 2);
        assert_eq!(s2.blocks.len(), 2);
        assert!(s2.targets[p.n_data()..].iter().all(|&t| !t));
    }

    #[test]
    fn determinism() {
        let p = small();
        let a = generate_sequence(&p, 3, 99, 5).unwrap();
        let b = generate_sequence(&p, 3, 99, 5).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_ne!(a, generate_sequence(&p, 3, 99, 6).unwrap());
    }

    #[test]
    fn identity_inversion_for_trivial_sequence() {
        let p = small();
        let nq = p.n_qubits();
        let c0 = vec![0u8; nq];
        let inv = compute_inversion(&p, &[Step::Cliffords(&c0)], &vec![false; nq]).unwrap();
        assert!(inv.iter().all(|&c| c == 0));
    }

    #[test]
    fn ideal_circuit_reaches_targets() {
        let p = Protocol::new(CodeLayout::new(4, 5).unwrap());
        for (id, m) in [(0u64, 0usize), (1, 1), (2, 2), (3, 4)] {
            let s = generate_sequence(&p, m, 17, id).unwrap();
            assert_eq!(ideal_outcome(&p, &s).unwrap(), s.target_word());
        }
    }

    #[test]
    fn missing_round_is_rejected() {
        let p = small();
        let s = generate_sequence(&p, 2, 3, 0).unwrap();
        let mut steps = s.steps();
        let pos = steps.iter().position(|x| *x == Step::Round).unwrap();
        steps.remove(pos);
        let err = compute_inversion(&p, &steps, &s.targets).unwrap_err();
        assert!(matches!(err, LaceError::ProtocolStructure(_)));
    }

    #[test]
    fn plans() {
        let p = ExperimentPlan::paper_scale(1);
        assert_eq!(p.total_sequences(), 1770);
        assert_eq!(p.shots, 2000);
        let d = ExperimentPlan::desk_scale(1);
        assert_eq!(d.total_sequences(), 210);
        assert!(ExperimentPlan::new(vec![], 1, 1, 0).is_err());
        assert!(ExperimentPlan::new(vec![1, 2], 1, 1, 0).is_err());
        let only0 = ExperimentPlan::new(vec![0], 4, 10, 0).unwrap();
        assert_eq!(only0.sequences().len(), 4);
        assert_eq!(ExperimentPlan::from_json(&d.to_json().unwrap()).unwrap(), d);
    }

    #[test]
    fn archive_round_trip() {
        let a = ShotArchive {
            n_qubits: 17,
            n_data: 9,
            shots: 3,
            records: vec![
                ShotRecord { sequence_id: 0, m: 0, words: vec![0, 1 << 12, 5] },
                ShotRecord { sequence_id: 1, m: 4, words: vec![7, 0, 0] },
            ],
        };
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"LACE");
        assert_eq!(ShotArchive::read_binary(&buf[..]).unwrap(), a);
        assert!(ShotArchive::read_binary(&b"NOPE"[..]).is_err());
        let mut csv_out = Vec::new();
        a.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(2).unwrap().starts_with("0,0,1,0,0,0"));
    }
}
