//! Rotated surface-code geometry and the scheduled stabilizer-preparation round.
//!
//! Data qubits sit on an `rows × cols` grid, qubit `r·cols + c`. Faces are
//! addressed by `(i, j)` with `0 ≤ i ≤ rows`, `0 ≤ j ≤ cols`; face `(i, j)` has
//! corners NW `(i−1, j−1)`, NE `(i−1, j)`, SW `(i, j−1)`, SE `(i, j)`. Faces with
//! `i + j` even are X-type. Interior faces are all present; top/bottom boundary
//! faces are kept only if X-type, left/right boundary faces only if Z-type.
//! Ancilla `a` is circuit qubit `n_data + a`, ancillas listed in `(i, j)` order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LaceError, Result};
use crate::pauli::{BitString, Pauli1, PauliOp};
use crate::tableau::{CliffordTableau, Gate};

/// Largest data-qubit count: data masks are single machine words.
pub const MAX_DATA: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabKind {
    X,
    Z,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ancilla {
    /// Face coordinate `(i, j)`.
    pub coord: (usize, usize),
    pub kind: StabKind,
    /// Data neighbors in schedule order.
    pub neighbors: Vec<usize>,
    /// CX time step (1–4) of each neighbor.
    pub schedule: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLayout {
    pub rows: usize,
    pub cols: usize,
    pub ancillas: Vec<Ancilla>,
    /// Optional display names of the physical device qubits, keyed by circuit qubit.
    #[serde(default)]
    pub device_map: Option<BTreeMap<usize, String>>,
}

// corner offsets relative to face (i, j): NW, NE, SW, SE
const CORNERS: [(isize, isize); 4] = [(-1, -1), (-1, 0), (0, -1), (0, 0)];
const X_ORDER: [usize; 4] = [0, 1, 2, 3];
const Z_ORDER: [usize; 4] = [0, 2, 1, 3];

impl CodeLayout {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(LaceError::Layout(format!("{rows}×{cols} grid: both dimensions must be at least 2")));
        }
        if rows * cols > MAX_DATA {
            return Err(LaceError::Layout(format!("{rows}×{cols} grid exceeds {MAX_DATA} data qubits")));
        }
        let mut ancillas = Vec::new();
        for i in 0..=rows {
            for j in 0..=cols {
                let kind = if (i + j) % 2 == 0 { StabKind::X } else { StabKind::Z };
                let vertical_edge = i == 0 || i == rows;
                let horizontal_edge = j == 0 || j == cols;
                let keep = match (vertical_edge, horizontal_edge) {
                    (false, false) => true,
                    (true, true) => false,
                    (true, false) => kind == StabKind::X,
                    (false, true) => kind == StabKind::Z,
                };
                if !keep {
                    continue;
                }
                let order = if kind == StabKind::X { X_ORDER } else { Z_ORDER };
                let mut neighbors = Vec::new();
                let mut schedule = Vec::new();
                for (step, &corner) in order.iter().enumerate() {
                    let (di, dj) = CORNERS[corner];
                    let (r, c) = (i as isize + di, j as isize + dj);
                    if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
                        neighbors.push(r as usize * cols + c as usize);
                        schedule.push(step as u8 + 1);
                    }
                }
                ancillas.push(Ancilla { coord: (i, j), kind, neighbors, schedule });
            }
        }
        let layout = Self { rows, cols, ancillas, device_map: None };
        layout.check_invariants()?;
        Ok(layout)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.ancillas.len() != self.n_data() - 1 {
            return Err(LaceError::Layout(format!(
                "{} ancillas for {} data qubits",
                self.ancillas.len(),
                self.n_data()
            )));
        }
        let gens = self.stabilizers();
        for (a, g) in gens.iter().enumerate() {
            if gens[a + 1..].iter().any(|h| !g.commutes_with(h)) {
                return Err(LaceError::Layout(format!("stabilizer {a} anticommutes with another generator")));
            }
        }
        let (lx, lz) = (self.logical_x(), self.logical_z());
        if gens.iter().any(|g| !g.commutes_with(&lx) || !g.commutes_with(&lz)) || lx.commutes_with(&lz) {
            return Err(LaceError::Layout("logical operators inconsistent with stabilizers".into()));
        }
        for q in 0..self.n_data() {
            if self.ancillas.iter().filter(|a| a.neighbors.contains(&q)).count() < 2 {
                return Err(LaceError::Layout(format!("data qubit {q} touches fewer than two ancillas")));
            }
        }
        Ok(())
    }

    pub fn n_data(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_ancillas(&self) -> usize {
        self.ancillas.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_data() + self.n_ancillas()
    }

    pub fn ancilla_qubit(&self, a: usize) -> usize {
        self.n_data() + a
    }

    pub fn data_index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn data_coord(&self, q: usize) -> (usize, usize) {
        (q / self.cols, q % self.cols)
    }

    /// Code distance `min(rows, cols)`.
    pub fn distance(&self) -> usize {
        self.rows.min(self.cols)
    }

    /// Lattice-adjacent data pairs `(a, b)` with `a < b`: horizontal edges first, then vertical.
    pub fn data_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols - 1 {
                edges.push((self.data_index(r, c), self.data_index(r, c + 1)));
            }
        }
        for r in 0..self.rows - 1 {
            for c in 0..self.cols {
                edges.push((self.data_index(r, c), self.data_index(r + 1, c)));
            }
        }
        edges
    }

    /// Lattice neighbors of data qubit `q`, ascending.
    pub fn data_neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .data_edges()
            .into_iter()
            .filter_map(|(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Support of ancilla `a` as a data mask.
    pub fn support_mask(&self, a: usize) -> u64 {
        self.ancillas[a].neighbors.iter().fold(0, |m, &q| m | 1 << q)
    }

    /// Generator of ancilla `a` as a Pauli on the data qubits.
    pub fn stabilizer(&self, a: usize) -> PauliOp {
        let m = self.support_mask(a);
        let (x, z) = match self.ancillas[a].kind {
            StabKind::X => (m, 0),
            StabKind::Z => (0, m),
        };
        PauliOp::from_words(self.n_data(), vec![x], vec![z], 0).expect("mask fits")
    }

    pub fn stabilizers(&self) -> Vec<PauliOp> {
        (0..self.n_ancillas()).map(|a| self.stabilizer(a)).collect()
    }

    /// Product of the generators selected by `mask` (bit `a` = ancilla `a`), as `(x, z)` masks.
    pub fn stabilizer_element(&self, mask: u64) -> (u64, u64) {
        let (mut x, mut z) = (0, 0);
        for a in 0..self.n_ancillas() {
            if mask >> a & 1 == 1 {
                match self.ancillas[a].kind {
                    StabKind::X => x ^= self.support_mask(a),
                    StabKind::Z => z ^= self.support_mask(a),
                }
            }
        }
        (x, z)
    }

    /// `X̄`: X on the left column.
    pub fn logical_x_masks(&self) -> (u64, u64) {
        ((0..self.rows).fold(0, |m, r| m | 1 << self.data_index(r, 0)), 0)
    }

    /// `Z̄`: Z on the top row.
    pub fn logical_z_masks(&self) -> (u64, u64) {
        (0, (0..self.cols).fold(0, |m, c| m | 1 << self.data_index(0, c)))
    }

    pub fn logical_x(&self) -> PauliOp {
        let (x, z) = self.logical_x_masks();
        PauliOp::from_words(self.n_data(), vec![x], vec![z], 0).expect("mask fits")
    }

    pub fn logical_z(&self) -> PauliOp {
        let (x, z) = self.logical_z_masks();
        PauliOp::from_words(self.n_data(), vec![x], vec![z], 0).expect("mask fits")
    }

    /// Syndrome of a data error given as `(x, z)` masks; bit `a` set iff it anticommutes with generator `a`.
    #[inline]
    pub fn syndrome_masks(&self, ex: u64, ez: u64) -> u64 {
        let mut s = 0u64;
        for (a, anc) in self.ancillas.iter().enumerate() {
            let m = self.support_mask(a);
            let hit = match anc.kind {
                StabKind::X => ez & m,
                StabKind::Z => ex & m,
            };
            s |= ((hit.count_ones() & 1) as u64) << a;
        }
        s
    }

    /// Data masks of `error`, which may be given on the data qubits or on all circuit qubits.
    pub fn data_masks(&self, error: &PauliOp) -> Result<(u64, u64)> {
        let n = error.num_qubits();
        if n != self.n_data() && n != self.n_qubits() {
            return Err(LaceError::SizeMismatch { expected: self.n_data(), got: n });
        }
        if error.support().iter().any(|&q| q >= self.n_data()) {
            return Err(LaceError::SupportOutsideData);
        }
        let keep = if self.n_data() == 64 { u64::MAX } else { (1u64 << self.n_data()) - 1 };
        Ok((error.x_words()[0] & keep, error.z_words()[0] & keep))
    }

    pub fn syndrome(&self, error: &PauliOp) -> Result<BitString> {
        let (x, z) = self.data_masks(error)?;
        BitString::new(self.syndrome_masks(x, z), self.n_ancillas())
    }

    /// Logical class of a syndrome-free error from `(x, z)` masks (no syndrome check).
    #[inline]
    pub fn logical_class_masks(&self, ex: u64, ez: u64) -> Pauli1 {
        let (lxx, _) = self.logical_x_masks();
        let (_, lzz) = self.logical_z_masks();
        // X component detected by Z̄, Z component by X̄
        let has_x = (ex & lzz).count_ones() % 2 == 1;
        let has_z = (ez & lxx).count_ones() % 2 == 1;
        Pauli1::from_bits(has_x, has_z)
    }

    pub fn logical_class(&self, error: &PauliOp) -> Result<Pauli1> {
        let (x, z) = self.data_masks(error)?;
        if self.syndrome_masks(x, z) != 0 {
            return Err(LaceError::NonzeroSyndrome);
        }
        Ok(self.logical_class_masks(x, z))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CodeLayout = serde_json::from_str(s)?;
        let fresh = CodeLayout::new(raw.rows, raw.cols)?;
        if fresh.ancillas != raw.ancillas {
            return Err(LaceError::Layout("ancilla list does not match the standard construction".into()));
        }
        Ok(CodeLayout { device_map: raw.device_map, ..fresh })
    }
}

/// One stabilizer-preparation round as gate layers over all circuit qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitRound {
    pub n_qubits: usize,
    pub layers: Vec<Vec<Gate>>,
}

impl CircuitRound {
    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    pub fn tableau(&self) -> Result<CliffordTableau> {
        let mut t = CliffordTableau::identity(self.n_qubits);
        t.apply_gates(self.gates())?;
        Ok(t)
    }

    /// Layers are valid if no qubit is used twice within a layer.
    pub fn layers_disjoint(&self) -> bool {
        self.layers.iter().all(|layer| {
            let mut used = vec![false; self.n_qubits];
            layer.iter().flat_map(|g| g.qubits()).all(|q| q < self.n_qubits && !std::mem::replace(&mut used[q], true))
        })
    }
}

/// Hadamards on X-ancillas, four scheduled CX layers, Hadamards again.
///
/// Z-ancillas are CX targets of their data neighbors; X-ancillas control CX onto theirs.
pub fn stabilizer_prep_round(layout: &CodeLayout) -> CircuitRound {
    let hadamards: Vec<Gate> = layout
        .ancillas
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind == StabKind::X)
        .map(|(k, _)| Gate::H(layout.ancilla_qubit(k)))
        .collect();
    let mut layers = vec![hadamards.clone()];
    for step in 1..=4u8 {
        let mut layer = Vec::new();
        for (k, anc) in layout.ancillas.iter().enumerate() {
            let q = layout.ancilla_qubit(k);
            for (&d, &s) in anc.neighbors.iter().zip(&anc.schedule) {
                if s == step {
                    layer.push(match anc.kind {
                        StabKind::Z => Gate::CX(d, q),
                        StabKind::X => Gate::CX(q, d),
                    });
                }
            }
        }
        layers.push(layer);
    }
    layers.push(hadamards);
    let round = CircuitRound { n_qubits: layout.n_qubits(), layers };
    assert!(round.layers_disjoint(), "schedule reuses a qubit within a layer");
    assert!(verify_two_round_identity(layout, &round), "shipped schedule fails the two-round identity");
    round
}

/// Whether two consecutive rounds act as the identity on the data qubits and return every
/// ancilla prepared in `|0⟩` to `|0⟩`.
pub fn verify_two_round_identity(layout: &CodeLayout, round: &CircuitRound) -> bool {
    if round.n_qubits != layout.n_qubits() {
        return false;
    }
    let Ok(mut t) = round.tableau() else { return false };
    if t.apply_gates(round.gates()).is_err() {
        return false;
    }
    let nd = layout.n_data();
    let nq = layout.n_qubits();
    let ancilla_z_only = |p: &PauliOp| (nd..nq).all(|q| matches!(p.get(q), Pauli1::I | Pauli1::Z));
    for k in 0..nd {
        for (img, want) in [(t.x_image(k), Pauli1::X), (t.z_image(k), Pauli1::Z)] {
            if img.phase() != 0 || !ancilla_z_only(img) {
                return false;
            }
            if (0..nd).any(|q| img.get(q) != if q == k { want } else { Pauli1::I }) {
                return false;
            }
        }
    }
    for q in nd..nq {
        let img = t.z_image(q);
        if img.phase() != 0 || (0..nd).any(|d| img.get(d) != Pauli1::I) || !ancilla_z_only(img) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_sizes() {
        let l = CodeLayout::new(4, 5).unwrap();
        assert_eq!((l.n_data(), l.n_ancillas(), l.n_qubits()), (20, 19, 39));
        assert_eq!(l.distance(), 4);
        assert_eq!(l.data_edges().len(), 31);
        let l = CodeLayout::new(3, 3).unwrap();
        assert_eq!((l.n_data(), l.n_ancillas(), l.distance()), (9, 8, 3));
        let l = CodeLayout::new(2, 2).unwrap();
        let weights: Vec<usize> = l.ancillas.iter().map(|a| a.neighbors.len()).collect();
        assert_eq!(weights, vec![2, 4, 2]);
        assert!(CodeLayout::new(1, 4).is_err());
    }

    #[test]
    fn boundary_faces_have_weight_two() {
        let l = CodeLayout::new(4, 5).unwrap();
        for a in &l.ancillas {
            let (i, j) = a.coord;
            let edge = i == 0 || i == l.rows || j == 0 || j == l.cols;
            assert_eq!(a.neighbors.len(), if edge { 2 } else { 4 });
        }
    }

    #[test]
    fn round_structure() {
        let l = CodeLayout::new(4, 5).unwrap();
        let r = stabilizer_prep_round(&l);
        assert_eq!(r.layers.len(), 6);
        assert!(r.layers[0].iter().all(|g| matches!(g, Gate::H(_))));
        for (k, _) in l.ancillas.iter().enumerate() {
            let q = l.ancilla_qubit(k);
            let touches = r.layers[1..5].iter().flatten().filter(|g| g.qubits().contains(&q)).count();
            assert_eq!(touches, l.ancillas[k].neighbors.len());
        }
    }

    #[test]
    fn deleting_a_cx_breaks_identity() {
        let l = CodeLayout::new(4, 5).unwrap();
        let mut r = stabilizer_prep_round(&l);
        r.layers[2].remove(0);
        assert!(!verify_two_round_identity(&l, &r));
    }

    #[test]
    fn bulk_z_flags_two_x_ancillas() {
        let l = CodeLayout::new(4, 5).unwrap();
        let q = l.data_index(1, 2);
        let s = l.syndrome(&PauliOp::single(l.n_data(), q, Pauli1::Z)).unwrap();
        assert_eq!(s.weight(), 2);
        assert!(s.ones().all(|a| l.ancillas[a].kind == StabKind::X));
    }

    #[test]
    fn logical_classes() {
        let l = CodeLayout::new(3, 3).unwrap();
        assert_eq!(l.logical_class(&l.logical_x()).unwrap(), Pauli1::X);
        assert_eq!(l.logical_class(&l.logical_z()).unwrap(), Pauli1::Z);
        assert_eq!(l.logical_class(&l.stabilizer(0)).unwrap(), Pauli1::I);
        let e = PauliOp::single(9, 4, Pauli1::X);
        assert!(matches!(l.logical_class(&e), Err(LaceError::NonzeroSyndrome)));
        let outside = PauliOp::single(l.n_qubits(), 10, Pauli1::X);
        assert!(matches!(l.syndrome(&outside), Err(LaceError::SupportOutsideData)));
    }

    #[test]
    fn json_round_trip() {
        let l = CodeLayout::new(3, 4).unwrap();
        let s = l.to_json().unwrap();
        assert!(s.contains("\"schedule\""));
        assert_eq!(CodeLayout::from_json(&s).unwrap(), l);
    }
}
