//! The 24-element single-qubit Clifford group (modulo global phase).

use std::sync::OnceLock;

use crate::pauli::{Pauli1, PauliOp};
use crate::tableau::{CliffordTableau, Gate};

#[derive(Clone, Debug)]
pub struct Clifford1 {
    /// Gate word on qubit 0 realising this element, applied left to right.
    pub word: Vec<Gate>,
    pub tableau: CliffordTableau,
    /// Frame action ignoring signs: images of X and of Z as (x, z) bit pairs.
    pub x_image: (bool, bool),
    pub z_image: (bool, bool),
}

impl Clifford1 {
    /// Gate word retargeted to qubit `q`.
    pub fn gates_on(&self, q: usize) -> impl Iterator<Item = Gate> + '_ {
        self.word.iter().map(move |g| match *g {
            Gate::H(_) => Gate::H(q),
            Gate::S(_) => Gate::S(q),
            Gate::Sdg(_) => Gate::Sdg(q),
            Gate::X(_) => Gate::X(q),
            Gate::Y(_) => Gate::Y(q),
            Gate::Z(_) => Gate::Z(q),
            Gate::CX(..) => unreachable!("single-qubit word"),
        })
    }

    /// Propagate frame bits `(x, z)` through this element.
    #[inline]
    pub fn map_frame(&self, x: u64, z: u64) -> (u64, u64) {
        let sel = |b: bool, w: u64| if b { w } else { 0 };
        let nx = sel(self.x_image.0, x) ^ sel(self.z_image.0, z);
        let nz = sel(self.x_image.1, x) ^ sel(self.z_image.1, z);
        (nx, nz)
    }

    /// `C P C†` for a one-qubit Pauli.
    pub fn conjugate(&self, p: &PauliOp) -> PauliOp {
        self.tableau.conjugate(p).expect("one-qubit operand")
    }
}

/// The group in a fixed deterministic order; index 0 is the identity.
pub fn group() -> &'static [Clifford1] {
    static GROUP: OnceLock<Vec<Clifford1>> = OnceLock::new();
    GROUP.get_or_init(|| {
        let mut found: Vec<Clifford1> = Vec::new();
        let mut frontier = vec![Vec::<Gate>::new()];
        while let Some(word) = (!frontier.is_empty()).then(|| frontier.remove(0)) {
            let mut t = CliffordTableau::identity(1);
            t.apply_gates(&word).expect("valid");
            if found.iter().any(|c| c.tableau == t) {
                continue;
            }
            let bits = |p: &PauliOp| (p.x_bit(0), p.z_bit(0));
            found.push(Clifford1 {
                x_image: bits(t.x_image(0)),
                z_image: bits(t.z_image(0)),
                word: word.clone(),
                tableau: t,
            });
            for g in [Gate::H(0), Gate::S(0), Gate::X(0), Gate::Z(0)] {
                let mut w = word.clone();
                w.push(g);
                frontier.push(w);
            }
        }
        assert_eq!(found.len(), 24, "single-qubit Clifford group must have 24 elements");
        found
    })
}

/// Index of the four Paulis I, X, Y, Z inside [`group`].
pub fn pauli_index(p: Pauli1) -> usize {
    let word: &[Gate] = match p {
        Pauli1::I => &[],
        Pauli1::X => &[Gate::X(0)],
        Pauli1::Y => &[Gate::Y(0)],
        Pauli1::Z => &[Gate::Z(0)],
    };
    let mut t = CliffordTableau::identity(1);
    t.apply_gates(word).expect("valid");
    group().iter().position(|c| c.tableau == t).expect("Paulis are Cliffords")
}

/// Index of the element "first `a`, then `b`".
pub fn compose(a: usize, b: usize) -> usize {
    let g = group();
    let t = g[a].tableau.then(&g[b].tableau).expect("same size");
    g.iter().position(|c| c.tableau == t).expect("group is closed")
}

/// Find the first element mapping the stabilizer `s` (a signed one-qubit Pauli) to `±Z`,
/// with sign `-` iff `target_one`.
pub fn find_inverter(s: &PauliOp, target_one: bool) -> Option<usize> {
    let want_phase = if target_one { 2 } else { 0 };
    group().iter().position(|c| {
        let img = c.conjugate(s);
        img.get(0) == Pauli1::Z && img.phase() == want_phase
    })
}
