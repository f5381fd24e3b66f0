use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::pauli::{product_phase, words_for, PauliString};
use crate::lang::GateKind;
use crate::weight::Weight;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StabilizerError {
    #[error("qubit index {qubit} out of range for {n} qubits")]
    OperandOutOfRange { qubit: usize, n: usize },
    #[error("{gate} expects {expected} operand(s), got {got}")]
    WrongOperandCount {
        gate: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("two-qubit gate operands must differ (qubit {0} given twice)")]
    RepeatedOperand(usize),
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("malformed generators: {0}")]
    Malformed(String),
}

/// One measurement result together with its exact probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeasurementOutcome {
    pub result: bool,
    pub probability: Weight,
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    X,
    Z,
}

/// Stabilizer generators of an `n`-qubit pure state: `n` commuting,
/// independent Pauli rows with signs `±1`.
///
/// Rows are stored flat, `words` 64-bit words per row for each of the x and
/// z parts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tableau {
    n: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    signs: Vec<bool>,
}

impl Tableau {
    /// The state `|0...0>`, stabilized by `Z_1 ... Z_n`.
    pub fn fresh(n: usize) -> Self {
        let words = words_for(n);
        let mut t = Tableau {
            n,
            words,
            x: vec![0; n * words],
            z: vec![0; n * words],
            signs: vec![false; n],
        };
        for q in 0..n {
            t.z[q * words + q / 64] |= 1 << (q % 64);
        }
        t
    }

    /// Build from Pauli strings such as `["+XX", "+ZZ"]`. The rows must be
    /// `n` independent, pairwise commuting operators on `n` qubits.
    pub fn from_generators<S: AsRef<str>>(rows: &[S]) -> Result<Self, StabilizerError> {
        let paulis = rows
            .iter()
            .map(|s| {
                PauliString::parse(s.as_ref())
                    .ok_or_else(|| StabilizerError::Malformed(format!("bad Pauli string {:?}", s.as_ref())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_paulis(&paulis)
    }

    pub fn from_paulis(paulis: &[PauliString]) -> Result<Self, StabilizerError> {
        let n = paulis.len();
        let words = words_for(n);
        let mut t = Tableau {
            n,
            words,
            x: Vec::with_capacity(n * words),
            z: Vec::with_capacity(n * words),
            signs: Vec::with_capacity(n),
        };
        for p in paulis {
            if p.num_qubits() != n {
                return Err(StabilizerError::Malformed(format!(
                    "{p} acts on {} qubits, expected {n}",
                    p.num_qubits()
                )));
            }
            if p.phase() % 2 == 1 {
                return Err(StabilizerError::Malformed(format!("{p} has an imaginary sign")));
            }
            t.x.extend_from_slice(p.x_words());
            t.z.extend_from_slice(p.z_words());
            t.signs.push(p.is_negative());
        }
        t.check_invariants().map_err(StabilizerError::Malformed)?;
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> PauliString {
        let r = i * self.words..(i + 1) * self.words;
        PauliString::from_parts(
            self.n,
            self.x[r.clone()].to_vec(),
            self.z[r].to_vec(),
            if self.signs[i] { 2 } else { 0 },
        )
    }

    pub fn rows(&self) -> impl Iterator<Item = PauliString> + '_ {
        (0..self.n).map(|i| self.row(i))
    }

    /// Generators as signed Pauli strings, one per row.
    pub fn dump(&self) -> Vec<String> {
        self.rows().map(|r| r.to_string()).collect()
    }

    #[inline]
    fn xb(&self, i: usize, q: usize) -> bool {
        self.x[i * self.words + q / 64] >> (q % 64) & 1 == 1
    }

    #[inline]
    fn zb(&self, i: usize, q: usize) -> bool {
        self.z[i * self.words + q / 64] >> (q % 64) & 1 == 1
    }

    #[inline]
    fn bit(&self, i: usize, block: Block, q: usize) -> bool {
        match block {
            Block::X => self.xb(i, q),
            Block::Z => self.zb(i, q),
        }
    }

    /// Append one qubit in `|0>`, returning its column index.
    pub fn add_qubit(&mut self) -> usize {
        let q = self.n;
        let n = self.n + 1;
        let words = words_for(n);
        if words != self.words {
            let relayout = |old: &[u64]| {
                let mut v = vec![0u64; n * words];
                for i in 0..self.n {
                    v[i * words..i * words + self.words]
                        .copy_from_slice(&old[i * self.words..(i + 1) * self.words]);
                }
                v
            };
            self.x = relayout(&self.x);
            self.z = relayout(&self.z);
        } else {
            self.x.extend(std::iter::repeat_n(0, words));
            self.z.extend(std::iter::repeat_n(0, words));
        }
        self.n = n;
        self.words = words;
        self.signs.push(false);
        self.z[q * words + q / 64] |= 1 << (q % 64);
        q
    }

    fn check_operand(&self, q: usize) -> Result<(), StabilizerError> {
        if q >= self.n {
            Err(StabilizerError::OperandOutOfRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Conjugate every generator by the gate.
    pub fn apply_gate(&mut self, gate: GateKind, operands: &[usize]) -> Result<(), StabilizerError> {
        if operands.len() != gate.arity() {
            return Err(StabilizerError::WrongOperandCount {
                gate,
                expected: gate.arity(),
                got: operands.len(),
            });
        }
        for &q in operands {
            self.check_operand(q)?;
        }
        let words = self.words;
        let (w, m) = (operands[0] / 64, 1u64 << (operands[0] % 64));
        match gate {
            GateKind::H => {
                for i in 0..self.n {
                    let k = i * words + w;
                    let (xv, zv) = (self.x[k] & m, self.z[k] & m);
                    if xv != 0 && zv != 0 {
                        self.signs[i] ^= true;
                    }
                    self.x[k] = (self.x[k] & !m) | zv;
                    self.z[k] = (self.z[k] & !m) | xv;
                }
            }
            GateKind::P => {
                for i in 0..self.n {
                    let k = i * words + w;
                    let (xv, zv) = (self.x[k] & m, self.z[k] & m);
                    if xv != 0 && zv != 0 {
                        self.signs[i] ^= true;
                    }
                    self.z[k] ^= xv;
                }
            }
            GateKind::X | GateKind::Y | GateKind::Z => {
                for i in 0..self.n {
                    let k = i * words + w;
                    let (xv, zv) = (self.x[k] & m != 0, self.z[k] & m != 0);
                    let flip = match gate {
                        GateKind::X => zv,
                        GateKind::Z => xv,
                        _ => xv ^ zv,
                    };
                    self.signs[i] ^= flip;
                }
            }
            GateKind::Cnot => {
                let (c, t) = (operands[0], operands[1]);
                if c == t {
                    return Err(StabilizerError::RepeatedOperand(c));
                }
                for i in 0..self.n {
                    let (xc, zc, xt, zt) = (self.xb(i, c), self.zb(i, c), self.xb(i, t), self.zb(i, t));
                    if xc && zt && (xt == zc) {
                        self.signs[i] ^= true;
                    }
                    if xc {
                        self.x[i * words + t / 64] ^= 1 << (t % 64);
                    }
                    if zt {
                        self.z[i * words + c / 64] ^= 1 << (c % 64);
                    }
                }
            }
        }
        self.debug_check();
        Ok(())
    }

    /// `row h <- row h * row i` for commuting rows.
    fn row_mul(&mut self, h: usize, i: usize) {
        let words = self.words;
        let (hr, ir) = (h * words..(h + 1) * words, i * words..(i + 1) * words);
        let g = product_phase(&self.x[hr.clone()], &self.z[hr.clone()], &self.x[ir.clone()], &self.z[ir.clone()]);
        let e = (2 * self.signs[h] as u32 + 2 * self.signs[i] as u32 + g) & 3;
        debug_assert!(e & 1 == 0, "product of commuting rows has an imaginary sign");
        self.signs[h] = e == 2;
        for k in 0..words {
            self.x[h * words + k] ^= self.x[i * words + k];
            self.z[h * words + k] ^= self.z[i * words + k];
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let words = self.words;
        for k in 0..words {
            self.x.swap(a * words + k, b * words + k);
            self.z.swap(a * words + k, b * words + k);
        }
        self.signs.swap(a, b);
    }

    fn set_row_single_z(&mut self, i: usize, q: usize, negative: bool) {
        let words = self.words;
        for k in 0..words {
            self.x[i * words + k] = 0;
            self.z[i * words + k] = 0;
        }
        self.z[i * words + q / 64] |= 1 << (q % 64);
        self.signs[i] = negative;
    }

    /// Gauss-Jordan elimination over the given columns, starting at `row`.
    /// Returns the next free row and the pivot columns used.
    fn eliminate(&mut self, columns: &[(Block, usize)], mut row: usize) -> (usize, Vec<(Block, usize)>) {
        let mut pivots = Vec::new();
        for &(block, q) in columns {
            let Some(p) = (row..self.n).find(|&i| self.bit(i, block, q)) else {
                continue;
            };
            self.swap_rows(p, row);
            for i in 0..self.n {
                if i != row && self.bit(i, block, q) {
                    self.row_mul(i, row);
                }
            }
            pivots.push((block, q));
            row += 1;
        }
        (row, pivots)
    }

    fn all_columns(n: usize) -> Vec<(Block, usize)> {
        (0..n)
            .map(|q| (Block::X, q))
            .chain((0..n).map(|q| (Block::Z, q)))
            .collect()
    }

    /// Reduced row-echelon form: x-block pivots first, then z-block.
    pub fn canonicalize(&self) -> Tableau {
        self.canonical_form().0
    }

    fn canonical_form(&self) -> (Tableau, Vec<(Block, usize)>) {
        let mut t = self.clone();
        let (_, pivots) = t.eliminate(&Self::all_columns(self.n), 0);
        (t, pivots)
    }

    /// If `(-1)^s p` lies in the stabilizer group, return `Some(s)`.
    fn membership(canonical: &Tableau, pivots: &[(Block, usize)], p: &PauliString) -> Option<bool> {
        let mut acc = p.clone();
        for (i, &(block, q)) in pivots.iter().enumerate() {
            let hit = match block {
                Block::X => acc.x_bit(q),
                Block::Z => acc.z_bit(q),
            };
            if hit {
                acc.mul_assign(&canonical.row(i));
            }
        }
        if !acc.is_identity() {
            return None;
        }
        match acc.phase() {
            0 => Some(false),
            2 => Some(true),
            _ => None,
        }
    }

    /// Whether `p` (with its sign) stabilizes this state.
    pub fn stabilizes(&self, p: &PauliString) -> bool {
        let (canonical, pivots) = self.canonical_form();
        Self::membership(&canonical, &pivots, p) == Some(false)
    }

    /// Measure qubit `q` in the computational basis. Returns one branch if the
    /// outcome is determined, otherwise both outcomes with probability 1/2.
    pub fn measure(&self, q: usize) -> Result<Vec<(MeasurementOutcome, Tableau)>, StabilizerError> {
        self.check_operand(q)?;
        let Some(p) = (0..self.n).find(|&i| self.xb(i, q)) else {
            let (canonical, pivots) = self.canonical_form();
            let zq = PauliString::single(self.n, q, 'Z');
            let result = Self::membership(&canonical, &pivots, &zq)
                .expect("Z_q commutes with a maximal stabilizer group, so +-Z_q is in it");
            let outcome = MeasurementOutcome {
                result,
                probability: Weight::ONE,
                deterministic: true,
            };
            return Ok(vec![(outcome, self.clone())]);
        };
        let mut collapsed = self.clone();
        for i in 0..self.n {
            if i != p && collapsed.xb(i, q) {
                collapsed.row_mul(i, p);
            }
        }
        let branches = [false, true]
            .into_iter()
            .map(|result| {
                let mut t = collapsed.clone();
                t.set_row_single_z(p, q, result);
                t.debug_check();
                let outcome = MeasurementOutcome {
                    result,
                    probability: Weight::HALF,
                    deterministic: false,
                };
                (outcome, t)
            })
            .collect();
        Ok(branches)
    }

    /// True iff both tableaux stabilize the same state.
    pub fn states_equal(&self, other: &Tableau) -> Result<bool, StabilizerError> {
        if self.n != other.n {
            return Err(StabilizerError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let (canonical, pivots) = self.canonical_form();
        Ok(other
            .rows()
            .all(|row| Self::membership(&canonical, &pivots, &row) == Some(false)))
    }

    /// If the qubits in `subset` are unentangled with the rest, return their
    /// (pure) state as a standalone tableau whose qubit `k` is `subset[k]`.
    pub fn subset_separable(&self, subset: &[usize]) -> Option<Tableau> {
        debug_assert!(subset.iter().all(|&q| q < self.n));
        let mut inside = vec![false; self.n];
        for &q in subset {
            debug_assert!(!inside[q], "duplicate qubit in subset");
            inside[q] = true;
        }
        let outside: Vec<usize> = (0..self.n).filter(|&q| !inside[q]).collect();
        let columns: Vec<(Block, usize)> = outside
            .iter()
            .map(|&q| (Block::X, q))
            .chain(outside.iter().map(|&q| (Block::Z, q)))
            .collect();
        let mut t = self.clone();
        let (first_inside, _) = t.eliminate(&columns, 0);
        if self.n - first_inside != subset.len() {
            return None;
        }
        let rows: Vec<PauliString> = (first_inside..self.n)
            .map(|i| {
                let mut p = PauliString::identity(subset.len());
                for (k, &q) in subset.iter().enumerate() {
                    let op = match (t.xb(i, q), t.zb(i, q)) {
                        (false, false) => 'I',
                        (true, false) => 'X',
                        (true, true) => 'Y',
                        (false, true) => 'Z',
                    };
                    p.set(k, op);
                }
                p.with_sign(t.signs[i])
            })
            .collect();
        let reduced = Tableau::from_paulis(&rows).expect("rows supported inside the subset form a full stabilizer group");
        Some(reduced.canonicalize())
    }

    /// Check pairwise commutation and full rank.
    pub fn check_invariants(&self) -> Result<(), String> {
        let rows: Vec<PauliString> = self.rows().collect();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if !rows[i].commutes_with(&rows[j]) {
                    return Err(format!("generators {} and {} anticommute", rows[i], rows[j]));
                }
            }
        }
        let mut t = self.clone();
        let (rank, _) = t.eliminate(&Self::all_columns(self.n), 0);
        if rank != self.n {
            return Err(format!("generators have rank {rank}, expected {}", self.n));
        }
        Ok(())
    }

    #[inline]
    fn debug_check(&self) {
        #[cfg(debug_assertions)]
        if let Err(e) = self.check_invariants() {
            panic!("tableau invariant broken: {e}\n{self}");
        }
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{row}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tableau{:?}", self.dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&str]) -> Tableau {
        Tableau::from_generators(rows).unwrap()
    }

    #[test]
    fn fresh_states() {
        assert_eq!(Tableau::fresh(1).dump(), ["+Z"]);
        assert_eq!(Tableau::fresh(2).dump(), ["+ZI", "+IZ"]);
        let empty = Tableau::fresh(0);
        assert!(empty.dump().is_empty());
        assert!(empty.states_equal(&Tableau::fresh(0)).unwrap());
        assert!(empty.states_equal(&Tableau::fresh(1)).is_err());
    }

    #[test]
    fn hadamard_makes_plus() {
        let mut s = Tableau::fresh(1);
        s.apply_gate(GateKind::H, &[0]).unwrap();
        assert_eq!(s.dump(), ["+X"]);
    }

    #[test]
    fn bell_state() {
        let mut s = Tableau::fresh(2);
        s.apply_gate(GateKind::H, &[0]).unwrap();
        s.apply_gate(GateKind::Cnot, &[0, 1]).unwrap();
        assert!(s.states_equal(&t(&["+XX", "+ZZ"])).unwrap());
        assert_eq!(s.canonicalize().dump(), ["+XX", "+ZZ"]);
    }

    #[test]
    fn z_fixes_zero() {
        let mut s = Tableau::fresh(1);
        s.apply_gate(GateKind::Z, &[0]).unwrap();
        assert_eq!(s.dump(), ["+Z"]);
        s.apply_gate(GateKind::X, &[0]).unwrap();
        assert_eq!(s.dump(), ["-Z"]);
    }

    #[test]
    fn phase_gate_takes_plus_to_plus_i() {
        let mut s = t(&["+X"]);
        s.apply_gate(GateKind::P, &[0]).unwrap();
        assert_eq!(s.dump(), ["+Y"]);
        s.apply_gate(GateKind::P, &[0]).unwrap();
        assert_eq!(s.dump(), ["-X"]);
    }

    #[test]
    fn operand_errors() {
        let mut s = Tableau::fresh(2);
        assert_eq!(
            s.apply_gate(GateKind::H, &[2]),
            Err(StabilizerError::OperandOutOfRange { qubit: 2, n: 2 })
        );
        assert_eq!(s.apply_gate(GateKind::Cnot, &[1, 1]), Err(StabilizerError::RepeatedOperand(1)));
        assert!(s.measure(5).is_err());
    }

    #[test]
    fn measure_plus_state() {
        let branches = t(&["+X"]).measure(0).unwrap();
        assert_eq!(branches.len(), 2);
        assert!(!branches[0].0.result);
        assert_eq!(branches[0].0.probability, Weight::HALF);
        assert_eq!(branches[0].1.dump(), ["+Z"]);
        assert!(branches[1].0.result);
        assert_eq!(branches[1].1.dump(), ["-Z"]);
    }

    #[test]
    fn measure_deterministic() {
        let branches = t(&["+Z"]).measure(0).unwrap();
        assert_eq!(branches.len(), 1);
        assert!(branches[0].0.deterministic);
        assert_eq!(branches[0].0.probability, Weight::ONE);
        assert!(!branches[0].0.result);
        let one = t(&["-Z"]).measure(0).unwrap();
        assert!(one[0].0.result);
    }

    #[test]
    fn deterministic_outcome_needs_row_products() {
        // -ZZ with +XX: qubit 1 is determined only once qubit 0 is known.
        let branches = t(&["+XX", "-ZZ"]).measure(0).unwrap();
        for (outcome, state) in branches {
            let second = state.measure(1).unwrap();
            assert_eq!(second.len(), 1);
            assert_eq!(second[0].0.result, !outcome.result);
        }
    }

    #[test]
    fn bell_measurements_correlate() {
        for (outcome, state) in t(&["+XX", "+ZZ"]).measure(0).unwrap() {
            let second = state.measure(1).unwrap();
            assert_eq!(second.len(), 1);
            assert_eq!(second[0].0.result, outcome.result);
        }
    }

    #[test]
    fn equality() {
        assert!(t(&["+X"]).states_equal(&t(&["+X"])).unwrap());
        assert!(!t(&["+Z"]).states_equal(&t(&["-Z"])).unwrap());
        // {XX, ZZ} and {XX, -YY} generate the same group.
        assert!(t(&["+XX", "+ZZ"]).states_equal(&t(&["-YY", "+XX"])).unwrap());
        assert!(t(&["-YY", "+ZZ"]).states_equal(&t(&["+XX", "+ZZ"])).unwrap());
        assert!(!t(&["+XX", "+ZZ"]).states_equal(&t(&["+XX", "-ZZ"])).unwrap());
        assert!(!t(&["+XX", "+ZZ"]).states_equal(&t(&["+ZI", "+IZ"])).unwrap());
    }

    #[test]
    fn canonical_form_is_order_independent() {
        assert_eq!(Tableau::fresh(2).canonicalize(), Tableau::fresh(2));
        assert_eq!(
            t(&["+ZZ", "+XX"]).canonicalize(),
            t(&["+XX", "+ZZ"]).canonicalize()
        );
        assert_eq!(
            t(&["-YY", "+ZZ"]).canonicalize(),
            t(&["+ZZ", "+XX"]).canonicalize()
        );
    }

    #[test]
    fn separability() {
        assert!(t(&["+XX", "+ZZ"]).subset_separable(&[0]).is_none());
        assert_eq!(t(&["+ZI", "+IX"]).subset_separable(&[1]).unwrap().dump(), ["+X"]);
        assert_eq!(t(&["-ZI", "+IX"]).subset_separable(&[0]).unwrap().dump(), ["-Z"]);
        // Product of a Bell pair on (0,2) and |-> on 1.
        let s = t(&["+XIX", "+ZIZ", "-IXI"]);
        assert_eq!(s.subset_separable(&[1]).unwrap().dump(), ["-X"]);
        assert!(s.subset_separable(&[2]).is_none());
        assert_eq!(s.subset_separable(&[2, 0]).unwrap().dump(), ["+XX", "+ZZ"]);
        assert!(s.subset_separable(&[]).unwrap().dump().is_empty());
    }

    #[test]
    fn malformed_generators_rejected() {
        assert!(Tableau::from_generators(&["+X", "+Z"]).is_err());
        assert!(Tableau::from_generators(&["+XI", "+ZI"]).is_err());
        assert!(Tableau::from_generators(&["+XX", "+XX"]).is_err());
        assert!(Tableau::from_generators(&["+Q"]).is_err());
    }

    #[test]
    fn add_qubit_across_word_boundary() {
        let mut s = Tableau::fresh(63);
        s.apply_gate(GateKind::H, &[62]).unwrap();
        let q = s.add_qubit();
        assert_eq!(q, 63);
        let q = s.add_qubit();
        assert_eq!(q, 64);
        s.apply_gate(GateKind::Cnot, &[62, 64]).unwrap();
        let pair = s.subset_separable(&[62, 64]).unwrap();
        assert!(pair.states_equal(&t(&["+XX", "+ZZ"])).unwrap());
    }
}
