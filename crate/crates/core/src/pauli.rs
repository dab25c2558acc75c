//! Bit strings and Pauli operators in the `i^phase · X^x Z^z` convention.
//!
//! Within each qubit the X factor is written to the left of the Z factor, so
//! `Y = i·X·Z` carries phase 1. Multiplication picks up `(-1)^{|z₁ ∧ x₂|}`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{LaceError, Result};

/// Fixed-length binary word over `n ≤ 64` sites; bit k set means an error on site k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString {
    bits: u64,
    n: u8,
}

impl BitString {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(LaceError::Size(format!("bit string of {n} sites exceeds 64")));
        }
        if n < 64 && bits >> n != 0 {
            return Err(LaceError::Size(format!("bits {bits:#x} do not fit in {n} sites")));
        }
        Ok(Self { bits, n: n as u8 })
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: 0, n: n as u8 }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, k: usize) -> bool {
        (self.bits >> k) & 1 == 1
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.get(k))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len() {
            f.write_str(if self.get(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Number of u64 words needed for `n` bits.
pub(crate) fn words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

#[inline]
pub(crate) fn get_bit(v: &[u64], k: usize) -> bool {
    (v[k / 64] >> (k % 64)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(v: &mut [u64], k: usize, on: bool) {
    let mask = 1u64 << (k % 64);
    if on {
        v[k / 64] |= mask;
    } else {
        v[k / 64] &= !mask;
    }
}

#[inline]
pub(crate) fn flip_bit(v: &mut [u64], k: usize) {
    v[k / 64] ^= 1u64 << (k % 64);
}

fn and_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// Single-qubit Pauli label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli1 {
    I,
    X,
    Y,
    Z,
}

impl Pauli1 {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli1::I => (false, false),
            Pauli1::X => (true, false),
            Pauli1::Y => (true, true),
            Pauli1::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli1::I,
            (true, false) => Pauli1::X,
            (true, true) => Pauli1::Y,
            (false, true) => Pauli1::Z,
        }
    }
}

/// An n-qubit Pauli operator `i^phase · Π_k X_k^{x_k} Z_k^{z_k}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliOp {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliOp {
    pub fn identity(n: usize) -> Self {
        Self { n, x: vec![0; words(n)], z: vec![0; words(n)], phase: 0 }
    }

    /// Single-qubit Hermitian Pauli `p` on qubit `q`.
    pub fn single(n: usize, q: usize, p: Pauli1) -> Self {
        let mut op = Self::identity(n);
        op.set(q, p);
        op
    }

    pub fn from_words(n: usize, x: Vec<u64>, z: Vec<u64>, phase: u8) -> Result<Self> {
        if x.len() != words(n) || z.len() != words(n) {
            return Err(LaceError::SizeMismatch { expected: words(n), got: x.len().min(z.len()) });
        }
        Ok(Self { n, x, z, phase: phase % 4 })
    }

    /// Parse a string such as `"XIZY"` (qubit 0 first), optionally prefixed by `+`, `-`, `i`, `-i`.
    pub fn parse(s: &str) -> Result<Self> {
        let (sign, body) = if let Some(b) = s.strip_prefix("-i") {
            (2u8, b)
        } else if let Some(b) = s.strip_prefix('-') {
            (2, b)
        } else if let Some(b) = s.strip_prefix('i') {
            (0, b)
        } else if let Some(b) = s.strip_prefix('+') {
            (0, b)
        } else {
            (0, s)
        };
        let imag = s.starts_with('i') || s.starts_with("-i");
        let mut op = Self::identity(body.len());
        for (q, c) in body.chars().enumerate() {
            let p = match c {
                'I' | '_' => Pauli1::I,
                'X' => Pauli1::X,
                'Y' => Pauli1::Y,
                'Z' => Pauli1::Z,
                other => return Err(LaceError::Config(format!("bad Pauli character `{other}`"))),
            };
            op.set(q, p);
        }
        op.phase = (op.phase + sign + if imag { 1 } else { 0 }) % 4;
        Ok(op)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn set_phase(&mut self, phase: u8) {
        self.phase = phase % 4;
    }

    /// The overall sign of the Hermitian operator: `+1` or `-1`.
    ///
    /// Hermitian operators have `phase ≡ #Y (mod 2)`; the sign is the remaining factor.
    pub fn sign(&self) -> i8 {
        let ys = and_popcount(&self.x, &self.z) as u8;
        if (self.phase + 4 - ys % 4) % 4 == 2 {
            -1
        } else {
            1
        }
    }

    pub fn get(&self, q: usize) -> Pauli1 {
        Pauli1::from_bits(get_bit(&self.x, q), get_bit(&self.z, q))
    }

    /// Overwrite qubit `q` with the Hermitian single-qubit Pauli `p`, keeping the sign.
    pub fn set(&mut self, q: usize, p: Pauli1) {
        let old_y = get_bit(&self.x, q) && get_bit(&self.z, q);
        let (x, z) = p.bits();
        set_bit(&mut self.x, q, x);
        set_bit(&mut self.z, q, z);
        let new_y = x && z;
        match (old_y, new_y) {
            (false, true) => self.phase = (self.phase + 1) % 4,
            (true, false) => self.phase = (self.phase + 3) % 4,
            _ => {}
        }
    }

    pub fn weight(&self) -> u32 {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones()).sum()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli1::I).collect()
    }

    /// True iff the operators commute (symplectic form vanishes).
    pub fn commutes_with(&self, other: &PauliOp) -> bool {
        (and_popcount(&self.x, &other.z) + and_popcount(&self.z, &other.x)).is_multiple_of(2)
    }

    /// Operator product `self · other` with phase tracking.
    pub fn mul(&self, other: &PauliOp) -> Result<PauliOp> {
        if self.n != other.n {
            return Err(LaceError::SizeMismatch { expected: self.n, got: other.n });
        }
        let mut out = self.clone();
        out.mul_assign_right(other);
        Ok(out)
    }

    /// `self ← self · other`; sizes must agree.
    pub fn mul_assign_right(&mut self, other: &PauliOp) {
        debug_assert_eq!(self.n, other.n);
        let swaps = and_popcount(&self.z, &other.x);
        self.phase = ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8;
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
    }

    /// Restrict to the first `k` qubits (dropping the rest; phase kept).
    pub fn truncate(&self, k: usize) -> PauliOp {
        let mut out = PauliOp::identity(k);
        for q in 0..k {
            set_bit(&mut out.x, q, get_bit(&self.x, q));
            set_bit(&mut out.z, q, get_bit(&self.z, q));
        }
        out.phase = self.phase;
        out
    }

    /// Embed into a larger register (extra qubits get identity).
    pub fn extend(&self, n: usize) -> PauliOp {
        let mut out = PauliOp::identity(n);
        for q in 0..self.n.min(n) {
            set_bit(&mut out.x, q, get_bit(&self.x, q));
            set_bit(&mut out.z, q, get_bit(&self.z, q));
        }
        out.phase = self.phase;
        out
    }

    pub(crate) fn x_bit(&self, q: usize) -> bool {
        get_bit(&self.x, q)
    }

    pub(crate) fn z_bit(&self, q: usize) -> bool {
        get_bit(&self.z, q)
    }

    pub(crate) fn xor_bits(&mut self, q: usize, x: bool, z: bool) {
        if x {
            flip_bit(&mut self.x, q);
        }
        if z {
            flip_bit(&mut self.z, q);
        }
    }

    pub(crate) fn add_phase(&mut self, k: u8) {
        self.phase = (self.phase + k) % 4;
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign() < 0 {
            f.write_str("-")?;
        }
        for q in 0..self.n {
            f.write_str(match self.get(q) {
                Pauli1::I => "I",
                Pauli1::X => "X",
                Pauli1::Y => "Y",
                Pauli1::Z => "Z",
            })?;
        }
        Ok(())
    }
}
