//! Fractional powers of a learned channel: `p(t) = W⁻¹ exp(t · log(W p))`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::prob::{project_simplex_values, wht_inverse_raw, EigenvalueVector, ProbDist};

/// Eigenvalues are floored here before taking logarithms.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub const DEFAULT_T_GRID: [f64; 7] = [1.0, 0.75, 0.5, 0.375, 0.25, 0.1875, 0.125];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionLog {
    /// Eigenvalues raised to the floor before the power.
    pub floored: usize,
    /// Negative entries zeroed by the simplex projection.
    pub negatives: usize,
    pub negative_mass: f64,
    /// Threshold subtracted by the projection.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub t: f64,
    pub distribution: ProbDist,
    pub log: ProjectionLog,
}

/// `W⁻¹ λᵗ` before projection, plus the number of floored eigenvalues.
pub fn interpolate_raw(l: &EigenvalueVector, t: f64) -> Result<(Vec<f64>, usize)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(LaceError::Config(format!("interpolation parameter {t} must be finite and ≥ 0")));
    }
    let mut floored = 0;
    let powered: Vec<f64> = l
        .values()
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                floored += 1;
            }
            if t == 0.0 {
                1.0
            } else {
                (t * v.max(EIGEN_FLOOR).ln()).exp()
            }
        })
        .collect();
    Ok((wht_inverse_raw(powered)?, floored))
}

/// Channel at "time" `t`, projected onto the simplex.
pub fn interpolate(l: &EigenvalueVector, t: f64) -> Result<Member> {
    let (raw, floored) = interpolate_raw(l, t)?;
    let negatives = raw.iter().filter(|&&v| v < 0.0).count();
    let negative_mass = raw.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let (values, threshold) = project_simplex_values(&raw);
    Ok(Member {
        t,
        distribution: ProbDist::new(l.num_sites(), values)?,
        log: ProjectionLog { floored, negatives, negative_mass, threshold },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFamily {
    pub members: Vec<Member>,
}

impl ChannelFamily {
    pub fn build(l: &EigenvalueVector, t_values: &[f64]) -> Result<Self> {
        let members = t_values.par_iter().map(|&t| interpolate(l, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { members })
    }

    pub fn get(&self, t: f64) -> Option<&Member> {
        self.members.iter().find(|m| (m.t - t).abs() < 1e-12)
    }
}

/// Probability mass per error weight (length `n + 1`).
pub fn weight_histogram(p: &ProbDist) -> Vec<f64> {
    let mut h = vec![0.0; p.num_sites() + 1];
    for (x, &v) in p.values().iter().enumerate() {
        h[x.count_ones() as usize] += v;
    }
    h
}

pub fn write_weight_csv<W: Write>(family: &ChannelFamily, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = family.members.first().map_or(0, |m| m.distribution.num_sites());
    let mut header = vec!["t".to_string()];
    header.extend((0..=n).map(|k| format!("w{k}")));
    out.write_record(&header)?;
    for m in &family.members {
        let mut row = vec![m.t.to_string()];
        row.extend(weight_histogram(&m.distribution).iter().map(|v| format!("{v:.9e}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Average single-site rate of the channel at `t`, straight from the eigenvalues.
pub fn average_rate_at(l: &EigenvalueVector, t: f64) -> f64 {
    let n = l.num_sites();
    (0..n).map(|i| (1.0 - l.get(1 << i).max(EIGEN_FLOOR).powf(t)) / 2.0).sum::<f64>() / n as f64
}

/// The `t` whose average single-site rate equals `target` (bisection; the rate grows with `t`).
pub fn t_for_average_rate(l: &EigenvalueVector, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while average_rate_at(l, hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(LaceError::Numeric(format!("average rate {target} is not reachable")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if average_rate_at(l, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{wht_forward, xor_convolve_raw};

    fn base() -> ProbDist {
        ProbDist::new(2, vec![0.85, 0.06, 0.05, 0.04]).unwrap()
    }

    #[test]
    fn endpoints() {
        let l = wht_forward(&base()).unwrap();
        let zero = interpolate(&l, 0.0).unwrap();
        assert_eq!(zero.distribution.values(), &[1.0, 0.0, 0.0, 0.0]);
        let (one, _) = interpolate_raw(&l, 1.0).unwrap();
        for (a, b) in one.iter().zip(base().values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(interpolate(&l, -1.0).is_err());
    }

    #[test]
    fn doubling_matches_self_convolution() {
        let l = wht_forward(&base()).unwrap();
        let (two, _) = interpolate_raw(&l, 2.0).unwrap();
        let conv = xor_convolve_raw(base().values(), base().values()).unwrap();
        for (a, b) in two.iter().zip(&conv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn non_positive_eigenvalues_are_floored_and_logged() {
        let l = EigenvalueVector::new(1, vec![1.0, -0.2]).unwrap();
        let m = interpolate(&l, 0.5).unwrap();
        assert_eq!(m.log.floored, 1);
        assert!((m.distribution.values()[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn histograms() {
        assert_eq!(weight_histogram(&ProbDist::delta(3, 0).unwrap()), vec![1.0, 0.0, 0.0, 0.0]);
        let h = weight_histogram(&ProbDist::product(&[0.1; 4]).unwrap());
        assert!((h[2] - 6.0 * 0.01 * 0.81).abs() < 1e-12);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_targeting() {
        let l = wht_forward(&ProbDist::product(&[0.2, 0.1]).unwrap()).unwrap();
        let t = t_for_average_rate(&l, 0.03).unwrap();
        assert!((average_rate_at(&l, t) - 0.03).abs() < 1e-12);
        let m = interpolate(&l, t).unwrap();
        assert!((m.distribution.mean_site_rate() - 0.03).abs() < 1e-9);
    }
}
