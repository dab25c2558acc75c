//! Approximate coset sums by boundary-MPS contraction.
//!
//! Each stabilizer face carries a binary variable saying whether its generator multiplies
//! the coset representative. Grouping faces by column turns the coset sum into a chain
//! of column transfer operators; the running boundary vector over one face column is kept
//! as an MPS and truncated to bond dimension `chi` after each column. Layouts taller than
//! they are wide are contracted transposed, so the MPS always spans the shorter axis.

use nalgebra::DMatrix;

use crate::error::{LaceError, Result};
use crate::surface::{CodeLayout, StabKind};

use super::{finish, CodeMaps, Decoder, Decoding, PauliPrior};

#[derive(Clone, Debug)]
struct Tensor {
    l: usize,
    r: usize,
    /// Indexed `(left, physical, right)`, physical dimension 2.
    data: Vec<f64>,
}

impl Tensor {
    fn at(&self, a: usize, s: usize, b: usize) -> f64 {
        self.data[(a * 2 + s) * self.r + b]
    }

    /// `(l·2) × r` matrix view.
    fn left_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.l * 2, self.r, &self.data)
    }

    /// `l × (2·r)` matrix view.
    fn right_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.l, 2 * self.r, &self.data)
    }

    fn from_rows(m: &DMatrix<f64>, l: usize, r: usize) -> Self {
        let mut data = Vec::with_capacity(l * 2 * r);
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self { l, r, data }
    }
}

/// Largest reconstruction residual, relative to the matrix norm, accepted from an SVD.
const SVD_RESIDUAL: f64 = 1e-10;

fn residual(m: &DMatrix<f64>, u: &DMatrix<f64>, s: &[f64], vt: &DMatrix<f64>) -> f64 {
    let us = DMatrix::from_fn(u.nrows(), s.len(), |a, b| u[(a, b)] * s[b]);
    (us * vt - m).norm()
}

/// `m = u · diag(s) · vt`. nalgebra's SVD occasionally returns an inaccurate factorization
/// of rank-deficient matrices, so each candidate is checked by reconstruction: first the
/// direct SVD, then the SVD of the transpose, then an eigendecomposition of `m mᵀ`.
fn checked_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let tol = SVD_RESIDUAL * m.norm();
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    if residual(m, &u, &s, &vt) <= tol {
        return (u, s, vt);
    }
    let svd = m.transpose().svd(true, true);
    let (u, vt) = (svd.v_t.expect("v_t requested").transpose(), svd.u.expect("u requested").transpose());
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    if residual(m, &u, &s, &vt) <= tol {
        return (u, s, vt);
    }
    let eig = (m * m.transpose()).symmetric_eigen();
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    let s: Vec<f64> = keep.iter().map(|&k| eig.eigenvalues[k].sqrt()).collect();
    let u = DMatrix::from_fn(m.nrows(), keep.len(), |a, b| eig.eigenvectors[(a, keep[b])]);
    let mut vt = u.transpose() * m;
    for (row, &sv) in s.iter().enumerate() {
        vt.row_mut(row).scale_mut(1.0 / sv);
    }
    (u, s, vt)
}

pub struct MpsDecoder {
    maps: CodeMaps,
    prior: PauliPrior,
    chi: usize,
    /// Face kinds indexed `[i][j]` in the contraction frame, `None` where the lattice has no face.
    faces: Vec<Vec<Option<StabKind>>>,
    /// Contraction-frame extent: MPS sites run over `rows + 1` faces, columns are swept.
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl MpsDecoder {
    pub fn new(layout: &CodeLayout, prior: PauliPrior, chi: usize) -> Result<Self> {
        if chi == 0 {
            return Err(LaceError::Config("bond dimension must be positive".into()));
        }
        if prior.num_qubits() != layout.n_data() {
            return Err(LaceError::SizeMismatch { expected: layout.n_data(), got: prior.num_qubits() });
        }
        let transposed = layout.rows > layout.cols;
        let (rows, cols) = if transposed { (layout.cols, layout.rows) } else { (layout.rows, layout.cols) };
        let mut faces = vec![vec![None; cols + 1]; rows + 1];
        for a in &layout.ancillas {
            let (i, j) = if transposed { (a.coord.1, a.coord.0) } else { a.coord };
            faces[i][j] = Some(a.kind);
        }
        Ok(Self { maps: CodeMaps::new(layout)?, prior, chi, faces, rows, cols, transposed })
    }

    /// Bond dimension that makes the contraction exact.
    pub fn exact_chi(layout: &CodeLayout) -> usize {
        1 << layout.rows.min(layout.cols)
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    fn valid(&self, i: usize, j: usize, v: usize) -> bool {
        v == 0 || self.faces[i][j].is_some()
    }

    /// Weight of data qubit `(r, c)` given the variables of its four faces.
    fn qubit_weight(&self, r: usize, c: usize, vars: [(usize, usize, usize); 4], ex: u64, ez: u64) -> f64 {
        let q = if self.transposed { self.maps.layout.data_index(c, r) } else { self.maps.layout.data_index(r, c) };
        let (mut x, mut z) = ((ex >> q & 1) as usize, (ez >> q & 1) as usize);
        for (i, j, v) in vars {
            if v == 1 {
                match self.faces[i][j] {
                    Some(StabKind::X) => x ^= 1,
                    Some(StabKind::Z) => z ^= 1,
                    None => return 0.0,
                }
            }
        }
        self.prior.probs[q][x | z << 1]
    }

    fn apply_column(&self, mps: &[Tensor], c: usize, ex: u64, ez: u64) -> Vec<Tensor> {
        let rows = self.rows;
        (0..=rows)
            .map(|i| {
                let a = &mps[i];
                let lo_dim = if i > 0 { 4 } else { 1 };
                let ro_dim = if i < rows { 4 } else { 1 };
                let (l, r) = (a.l * lo_dim, a.r * ro_dim);
                let mut data = vec![0.0; l * 2 * r];
                for lo in 0..lo_dim {
                    for alpha in 0..2 {
                        for beta in 0..2 {
                            if !self.valid(i, c, alpha) || !self.valid(i, c + 1, beta) {
                                continue;
                            }
                            let w = if i > 0 {
                                let (ap, bp) = (lo & 1, lo >> 1);
                                self.qubit_weight(
                                    i - 1,
                                    c,
                                    [(i - 1, c, ap), (i, c, alpha), (i - 1, c + 1, bp), (i, c + 1, beta)],
                                    ex,
                                    ez,
                                )
                            } else {
                                1.0
                            };
                            if w == 0.0 {
                                continue;
                            }
                            let ro = if i < rows { alpha | beta << 1 } else { 0 };
                            for al in 0..a.l {
                                let row = ((al * lo_dim + lo) * 2 + beta) * r;
                                for ar in 0..a.r {
                                    data[row + ar * ro_dim + ro] += a.at(al, alpha, ar) * w;
                                }
                            }
                        }
                    }
                }
                Tensor { l, r, data }
            })
            .collect()
    }

    /// Left-canonicalize, then truncate right to left to `chi`; returns the log of the
    /// norm pulled out of the tensors.
    fn compress(&self, mps: &mut [Tensor]) -> f64 {
        let n = mps.len();
        for i in 0..n - 1 {
            let m = mps[i].left_matrix();
            let qr = m.qr();
            let (q, rm) = (qr.q(), qr.r());
            let k = q.ncols();
            mps[i] = Tensor::from_rows(&q, mps[i].l, k);
            let next = &mps[i + 1];
            let merged = &rm * next.right_matrix();
            mps[i + 1] = Tensor::from_rows(&merged, k, next.r);
        }
        let mut log_norm = 0.0;
        for i in (1..n).rev() {
            let (u, s, vt) = checked_svd(&mps[i].right_matrix());
            let mut order: Vec<usize> = (0..s.len()).collect();
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
            let keep: Vec<usize> = order.into_iter().take(self.chi).filter(|&k| s[k] > 0.0).collect();
            let keep = if keep.is_empty() { vec![0] } else { keep };
            let k = keep.len();
            let vt_k = DMatrix::from_fn(k, vt.ncols(), |a, b| vt[(keep[a], b)]);
            let us_k = DMatrix::from_fn(u.nrows(), k, |a, b| u[(a, keep[b])] * s[keep[b]]);
            mps[i] = Tensor::from_rows(&vt_k, k, mps[i].r);
            let prev = &mps[i - 1];
            let merged = prev.left_matrix() * us_k;
            mps[i - 1] = Tensor::from_rows(&merged, prev.l, k);
        }
        let norm = mps[0].data.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            mps[0].data.iter_mut().for_each(|v| *v /= norm);
            log_norm = norm.ln();
        }
        log_norm
    }

    /// Natural log of the total probability of the coset of `(ex, ez)`; `−∞` when empty.
    pub fn log_coset_prob(&self, ex: u64, ez: u64) -> Result<f64> {
        let mut mps: Vec<Tensor> = (0..=self.rows)
            .map(|i| Tensor { l: 1, r: 1, data: vec![1.0, if self.valid(i, 0, 1) { 1.0 } else { 0.0 }] })
            .collect();
        let mut log_scale = 0.0;
        for c in 0..self.cols {
            mps = self.apply_column(&mps, c, ex, ez);
            log_scale += self.compress(&mut mps);
        }
        // sum over the last face column
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for t in &mps {
            let summed = DMatrix::from_fn(t.l, t.r, |a, b| t.at(a, 0, b) + t.at(a, 1, b));
            acc *= summed;
        }
        let total = acc[(0, 0)];
        if !total.is_finite() {
            return Err(LaceError::DegenerateContraction(format!("coset contraction gave {total}")));
        }
        // empty cosets (and truncation round-off below zero) count as probability zero
        Ok(if total > 0.0 { log_scale + total.ln() } else { f64::NEG_INFINITY })
    }
}

impl Decoder for MpsDecoder {
    fn maps(&self) -> &CodeMaps {
        &self.maps
    }

    fn decode(&self, syndrome: u64) -> Result<Decoding> {
        let mut logs = [0.0; 4];
        for (class, slot) in logs.iter_mut().enumerate() {
            let (x, z) = self.maps.representative(syndrome, class);
            *slot = self.log_coset_prob(x, z)?;
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(LaceError::DegenerateContraction("every coset has probability zero".into()));
        }
        finish(&self.maps, syndrome, logs.map(|l| (l - top).exp()))
    }
}
