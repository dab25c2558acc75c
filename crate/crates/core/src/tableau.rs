//! Clifford tableaus: the images `U X_k U†` and `U Z_k U†` of every generator.

use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::pauli::PauliOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    CX(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::Sdg(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![q],
            Gate::CX(c, t) => vec![c, t],
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            g => g,
        }
    }
}

/// Conjugate `p` by a single gate: `p ← G p G†`.
pub fn conjugate_by_gate(p: &mut PauliOp, gate: Gate) {
    match gate {
        Gate::H(q) => {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            if x != z {
                p.xor_bits(q, true, true);
            }
            if x && z {
                p.add_phase(2);
            }
        }
        Gate::S(q) => {
            // X -> iXZ, Z -> Z
            if p.x_bit(q) {
                p.xor_bits(q, false, true);
                p.add_phase(1);
            }
        }
        Gate::Sdg(q) => {
            if p.x_bit(q) {
                p.xor_bits(q, false, true);
                p.add_phase(3);
            }
        }
        Gate::X(q) => {
            if p.z_bit(q) {
                p.add_phase(2);
            }
        }
        Gate::Z(q) => {
            if p.x_bit(q) {
                p.add_phase(2);
            }
        }
        Gate::Y(q) => {
            if p.x_bit(q) != p.z_bit(q) {
                p.add_phase(2);
            }
        }
        Gate::CX(c, t) => {
            let xc = p.x_bit(c);
            let zt = p.z_bit(t);
            p.xor_bits(t, xc, false);
            p.xor_bits(c, false, zt);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliffordTableau {
    n: usize,
    /// Rows `0..n` are images of `X_k`, rows `n..2n` images of `Z_k`.
    rows: Vec<PauliOp>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for k in 0..n {
            rows.push(PauliOp::single(n, k, crate::pauli::Pauli1::X));
        }
        for k in 0..n {
            rows.push(PauliOp::single(n, k, crate::pauli::Pauli1::Z));
        }
        Self { n, rows }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, k: usize) -> &PauliOp {
        &self.rows[k]
    }

    pub fn z_image(&self, k: usize) -> &PauliOp {
        &self.rows[self.n + k]
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n {
            Err(LaceError::IndexOutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Append `gate` after the circuit represented by this tableau.
    pub fn apply_gate(&mut self, gate: Gate) -> Result<()> {
        for q in gate.qubits() {
            self.check(q)?;
        }
        if let Gate::CX(c, t) = gate {
            if c == t {
                return Err(LaceError::Config(format!("CX with control = target = {c}")));
            }
        }
        for row in &mut self.rows {
            conjugate_by_gate(row, gate);
        }
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for &g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// `U P U†`.
    pub fn conjugate(&self, p: &PauliOp) -> Result<PauliOp> {
        if p.num_qubits() != self.n {
            return Err(LaceError::SizeMismatch { expected: self.n, got: p.num_qubits() });
        }
        let mut out = PauliOp::identity(self.n);
        out.set_phase(p.phase());
        for k in 0..self.n {
            if p.x_bit(k) {
                out.mul_assign_right(&self.rows[k]);
            }
            if p.z_bit(k) {
                out.mul_assign_right(&self.rows[self.n + k]);
            }
        }
        Ok(out)
    }

    /// The tableau of `other ∘ self` (first `self`, then `other`).
    pub fn then(&self, other: &CliffordTableau) -> Result<CliffordTableau> {
        let rows = self.rows.iter().map(|r| other.conjugate(r)).collect::<Result<Vec<_>>>()?;
        Ok(CliffordTableau { n: self.n, rows })
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordTableau::identity(self.n)
    }

    /// Checks that the rows satisfy the canonical commutation relations and are Hermitian.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        for i in 0..2 * n {
            let ri = &self.rows[i];
            let ys: u32 = ri.x_words().iter().zip(ri.z_words()).map(|(a, b)| (a & b).count_ones()).sum();
            if !(ri.phase() as u32 + 4 - ys % 4).is_multiple_of(2) {
                return false;
            }
            for j in i + 1..2 * n {
                let should_anticommute = j == i + n;
                if ri.commutes_with(&self.rows[j]) == should_anticommute {
                    return false;
                }
            }
        }
        true
    }

    /// Inverse tableau, found by solving for preimages of each generator.
    pub fn inverse(&self) -> Result<CliffordTableau> {
        // U† P U for P = X_k, Z_k. Write P in the basis of the rows: P = Π rows^{c}, then
        // U† P U = Π (generators)^{c} with the phase fixed by conjugating back.
        let n = self.n;
        let mut rows = Vec::with_capacity(2 * n);
        for target_row in CliffordTableau::identity(n).rows {
            // coefficients: commutation with rows gives the symplectic coordinates
            let mut pre = PauliOp::identity(n);
            for k in 0..n {
                // coefficient on X_k generator is detected by anticommutation with image of Z_k
                if !target_row.commutes_with(&self.rows[n + k]) {
                    pre.xor_bits(k, true, false);
                }
                if !target_row.commutes_with(&self.rows[k]) {
                    pre.xor_bits(k, false, true);
                }
            }
            // fix phase so that U pre U† == target_row exactly
            let img = self.conjugate(&pre)?;
            let diff = (target_row.phase() + 4 - img.phase()) % 4;
            pre.add_phase(diff);
            rows.push(pre);
        }
        Ok(CliffordTableau { n, rows })
    }
}
