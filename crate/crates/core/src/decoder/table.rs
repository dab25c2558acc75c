//! Exact maximum-likelihood lookup table over every syndrome.
//!
//! Under an independent prior the joint distribution of (syndrome, logical class) is the
//! XOR-convolution of each qubit's contribution, built one qubit at a time over all
//! `2^{g+2}` outcomes. Every term is non-negative, so small probabilities keep full
//! relative precision.

use rayon::prelude::*;

use crate::error::{LaceError, Result};
use crate::surface::CodeLayout;

use super::{finish, CodeMaps, Decoder, Decoding, PauliPrior};

/// Largest `stabilizers + 2` the table accepts.
pub const MAX_TABLE_BITS: usize = 24;

pub struct TableDecoder {
    maps: CodeMaps,
    g: usize,
    /// Joint probability indexed `syndrome | class << g`.
    joint: Vec<f64>,
}

impl TableDecoder {
    pub fn new(layout: &CodeLayout, prior: &PauliPrior) -> Result<Self> {
        let g = layout.n_ancillas();
        if g + 2 > MAX_TABLE_BITS {
            return Err(LaceError::Size(format!("{g} stabilizers exceed the lookup-table limit")));
        }
        if prior.num_qubits() != layout.n_data() {
            return Err(LaceError::SizeMismatch { expected: layout.n_data(), got: prior.num_qubits() });
        }
        let maps = CodeMaps::new(layout)?;
        let key = |x: u64, z: u64| (maps.syndrome(x, z) | (maps.class_of(x, z) as u64) << g) as usize;
        let mut joint = vec![0.0; 1 << (g + 2)];
        joint[0] = 1.0;
        for q in 0..layout.n_data() {
            let shifts = [0, key(1 << q, 0), key(0, 1 << q), key(1 << q, 1 << q)];
            let p = prior.probs[q];
            joint =
                (0..joint.len()).into_par_iter().map(|k| (0..4).map(|e| p[e] * joint[k ^ shifts[e]]).sum()).collect();
        }
        Ok(Self { maps, g, joint })
    }

    pub fn joint_prob(&self, syndrome: u64, class: usize) -> f64 {
        self.joint[(syndrome | (class as u64) << self.g) as usize]
    }
}

impl Decoder for TableDecoder {
    fn maps(&self) -> &CodeMaps {
        &self.maps
    }

    fn decode(&self, syndrome: u64) -> Result<Decoding> {
        if syndrome >> self.g != 0 {
            return Err(LaceError::IndexOutOfRange { index: syndrome as usize, n: 1 << self.g });
        }
        finish(&self.maps, syndrome, std::array::from_fn(|c| self.joint_prob(syndrome, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::BruteForceDecoder;

    #[test]
    fn table_matches_enumeration() {
        let l = CodeLayout::new(3, 3).unwrap();
        let prior = PauliPrior::new(
            (0..9)
                .map(|q| {
                    let p = 0.04 + 0.01 * q as f64;
                    [1.0 - p, p * 0.2, p * 0.5, p * 0.3]
                })
                .collect(),
        )
        .unwrap();
        let bf = BruteForceDecoder::new(&l, prior.clone()).unwrap();
        let table = TableDecoder::new(&l, &prior).unwrap();
        for s in 0..1u64 << 8 {
            let (a, b) = (bf.decode(s).unwrap(), table.decode(s).unwrap());
            assert_eq!(a.class, b.class);
            for c in 0..4 {
                let (x, z) = bf.maps().representative(s, c);
                let want = bf.coset_prob(x, z);
                assert!((table.joint_prob(s, c) - want).abs() <= 1e-12 * want.max(1e-300));
            }
        }
    }
}
