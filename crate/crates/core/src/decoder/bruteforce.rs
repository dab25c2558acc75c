//! Exact coset sums by enumerating the stabilizer group (small codes only).

use crate::error::{LaceError, Result};
use crate::surface::CodeLayout;

use super::{finish, CodeMaps, Decoder, Decoding, PauliPrior};

/// Largest data-qubit count the exhaustive decoder accepts.
pub const MAX_BRUTE_FORCE_DATA: usize = 10;

pub struct BruteForceDecoder {
    maps: CodeMaps,
    prior: PauliPrior,
    /// Stabilizer generators as `(x, z)` masks.
    gens: Vec<(u64, u64)>,
}

impl BruteForceDecoder {
    pub fn new(layout: &CodeLayout, prior: PauliPrior) -> Result<Self> {
        if layout.n_data() > MAX_BRUTE_FORCE_DATA {
            return Err(LaceError::Size(format!(
                "exhaustive decoding supports at most {MAX_BRUTE_FORCE_DATA} data qubits, got {}",
                layout.n_data()
            )));
        }
        if prior.num_qubits() != layout.n_data() {
            return Err(LaceError::SizeMismatch { expected: layout.n_data(), got: prior.num_qubits() });
        }
        let gens = (0..layout.n_ancillas()).map(|a| layout.stabilizer_element(1 << a)).collect();
        Ok(Self { maps: CodeMaps::new(layout)?, prior, gens })
    }

    /// Total probability of the coset of `(ex, ez)`.
    pub fn coset_prob(&self, ex: u64, ez: u64) -> f64 {
        // walk the group in Gray-code order, one generator flip per step
        let (mut x, mut z) = (ex, ez);
        let mut total = self.prior.prob(x, z);
        for k in 1u64..1 << self.gens.len() {
            let (gx, gz) = self.gens[k.trailing_zeros() as usize];
            x ^= gx;
            z ^= gz;
            total += self.prior.prob(x, z);
        }
        total
    }
}

impl Decoder for BruteForceDecoder {
    fn maps(&self) -> &CodeMaps {
        &self.maps
    }

    fn decode(&self, syndrome: u64) -> Result<Decoding> {
        let probs = std::array::from_fn(|class| {
            let (x, z) = self.maps.representative(syndrome, class);
            self.coset_prob(x, z)
        });
        finish(&self.maps, syndrome, probs)
    }
}
