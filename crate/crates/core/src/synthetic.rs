//! Synthetic ground-truth channels with known structure.
//!
//! Both generators produce per-block distributions of observed flips whose single-site
//! marginals match a target list; the reference list is the 20-qubit table below.

use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::prob::{locally_average, project_simplex_values, wht_inverse_raw, ProbDist, LOCAL_DETECTION, MAX_SITES};
use crate::surface::CodeLayout;

/// Reference per-qubit error rates of a 4×5 patch, row-major (average 0.136).
pub const REFERENCE_RATES: [f64; 20] = [
    0.080, 0.152, 0.132, 0.105, 0.087, 0.150, 0.114, 0.102, 0.075, 0.168, 0.182, 0.097, 0.197, 0.215, 0.152, 0.108,
    0.230, 0.136, 0.140, 0.092,
];

/// Nearest-neighbor coupling of the bundled Ising truth.
pub const PAPER_LIKE_COUPLING: f64 = 0.45;

fn check_rates(layout: &CodeLayout, rates: &[f64]) -> Result<()> {
    if rates.len() != layout.n_data() {
        return Err(LaceError::SizeMismatch { expected: layout.n_data(), got: rates.len() });
    }
    if layout.n_data() > MAX_SITES {
        return Err(LaceError::Size(format!("{} data qubits exceeds the dense cap", layout.n_data())));
    }
    if rates.iter().any(|&q| !(q > 0.0 && q < 0.5)) {
        return Err(LaceError::Config("target rates must lie in (0, 1/2)".into()));
    }
    Ok(())
}

/// Ising field `p(x) ∝ exp(Σ hᵢxᵢ + K Σ_{⟨ij⟩} xᵢxⱼ)` over lattice neighbors, with the
/// fields `h` solved so that every marginal equals `rates`.
pub fn ising_field(layout: &CodeLayout, rates: &[f64], coupling: f64) -> Result<ProbDist> {
    check_rates(layout, rates)?;
    let n = layout.n_data();
    let edges: Vec<u64> = layout.data_edges().iter().map(|&(a, b)| (1u64 << a) | (1u64 << b)).collect();
    let logit = |q: f64| (q / (1.0 - q)).ln();
    let mut h: Vec<f64> = rates.iter().map(|&q| logit(q)).collect();
    let pair_counts: Vec<f64> = (0..1u64 << n).map(|x| edges.iter().filter(|&&e| x & e == e).count() as f64).collect();
    let mut p = Vec::new();
    for _ in 0..200 {
        let mut w: Vec<f64> = (0..1usize << n)
            .map(|x| {
                let field: f64 = (0..n).filter(|&i| x >> i & 1 == 1).map(|i| h[i]).sum();
                (field + coupling * pair_counts[x]).exp()
            })
            .collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        let dist = ProbDist::from_weights(n, w)?;
        let cur = dist.site_rates();
        let worst = cur.iter().zip(rates).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = dist.into_values();
        if worst < 1e-13 {
            break;
        }
        for i in 0..n {
            h[i] += logit(rates[i]) - logit(cur[i]);
        }
    }
    ProbDist::from_weights(n, p)
}

/// The bundled Ising truth on a 4×5 layout: reference rates with nearest-neighbor coupling.
pub fn paper_like(layout: &CodeLayout) -> Result<ProbDist> {
    ising_field(layout, &REFERENCE_RATES, PAPER_LIKE_COUPLING)
}

/// Rates of the correlated multi-qubit events of [`correlated`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRates {
    /// Lattice-neighbor pairs.
    pub neighbor_pair: f64,
    /// Pairs two apart along the short lattice axis.
    pub skip_pair: f64,
    /// L-shaped triples.
    pub triple: f64,
}

impl Default for EventRates {
    fn default() -> Self {
        Self { neighbor_pair: 0.014, skip_pair: 0.008, triple: 0.006 }
    }
}

/// Supports of the correlated events on `layout`.
pub fn correlated_events(layout: &CodeLayout, rates: &EventRates) -> Vec<(u64, f64)> {
    let mut events = Vec::new();
    for (a, b) in layout.data_edges() {
        events.push(((1u64 << a) | (1u64 << b), rates.neighbor_pair));
    }
    let (rows, cols) = (layout.rows, layout.cols);
    let q = |r: usize, c: usize| 1u64 << layout.data_index(r, c);
    // the short axis holds the lines the coarse-grained chain treats as super-variables
    if rows <= cols {
        for c in 0..cols {
            for r in 0..rows.saturating_sub(2) {
                events.push((q(r, c) | q(r + 2, c), rates.skip_pair));
            }
        }
    } else {
        for r in 0..rows {
            for c in 0..cols.saturating_sub(2) {
                events.push((q(r, c) | q(r, c + 2), rates.skip_pair));
            }
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            if (r + c) % 2 == 0 {
                events.push((q(r, c) | q(r + 1, c) | q(r + 1, c + 1), rates.triple));
            }
        }
    }
    events
}

/// Eigenvalues of a product of independent XOR-event channels: each event with support
/// `e` and rate `r` contributes `exp(−2r)` to `λ_s` whenever `|e ∩ s|` is odd.
pub fn event_eigenvalues(n: usize, events: &[(u64, f64)]) -> Vec<f64> {
    (0..1u64 << n)
        .map(|s| {
            let exponent: f64 = events.iter().filter(|(e, _)| (e & s).count_ones() % 2 == 1).map(|(_, r)| r).sum();
            (-2.0 * exponent).exp()
        })
        .collect()
}

/// Correlated channel built from Pauli-error events: neighbor pairs, skip pairs and
/// triples at fixed rates plus single-site events, composed in the any-error picture and
/// then locally averaged, with single-site events sized so the observed marginals equal
/// `rates`. Building it this way keeps it realizable by the effective-mode simulator.
pub fn correlated(layout: &CodeLayout, rates: &[f64], event_rates: &EventRates) -> Result<ProbDist> {
    check_rates(layout, rates)?;
    let n = layout.n_data();
    let mut events = correlated_events(layout, event_rates);
    for (i, &q) in rates.iter().enumerate() {
        let any = q / LOCAL_DETECTION;
        if any >= 0.5 {
            return Err(LaceError::Config(format!("rate of site {i} is too large for an event channel")));
        }
        let total = -(1.0 - 2.0 * any).ln() / 2.0;
        let shared: f64 = events.iter().filter(|(e, _)| e >> i & 1 == 1).map(|(_, r)| r).sum();
        if shared > total {
            return Err(LaceError::Config(format!("correlated events alone exceed the rate of site {i}")));
        }
        events.push((1u64 << i, total - shared));
    }
    let raw = wht_inverse_raw(event_eigenvalues(n, &events))?;
    let (values, _) = project_simplex_values(&raw);
    Ok(locally_average(&ProbDist::from_weights(n, values)?))
}

/// The bundled correlated truth on a 4×5 layout.
pub fn correlated_reference(layout: &CodeLayout) -> Result<ProbDist> {
    correlated(layout, &REFERENCE_RATES, &EventRates::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ising_marginals_match_targets() {
        let l = CodeLayout::new(2, 3).unwrap();
        let rates = [0.1, 0.2, 0.15, 0.05, 0.12, 0.3];
        let p = ising_field(&l, &rates, 0.8).unwrap();
        for (a, b) in p.site_rates().iter().zip(&rates) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn correlated_marginals_match_targets() {
        let l = CodeLayout::new(3, 3).unwrap();
        let rates = [0.1, 0.2, 0.15, 0.05, 0.12, 0.3, 0.1, 0.1, 0.1];
        let p = correlated(&l, &rates, &EventRates::default()).unwrap();
        for (a, b) in p.site_rates().iter().zip(&rates) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(crate::prob::any_error_preimage(&p).is_ok());
        let too_strong = EventRates { neighbor_pair: 0.2, ..EventRates::default() };
        assert!(correlated(&l, &rates, &too_strong).is_err());
    }
}
