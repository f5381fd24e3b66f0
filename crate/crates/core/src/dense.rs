//! Dense density-matrix simulation for small systems.
//!
//! This is a reference implementation used to cross-check the stabilizer
//! engine. It stores the full `2^n x 2^n` complex matrix, so it refuses to
//! grow past [`CAP`] qubits. Qubit 0 is the most significant bit of a basis
//! index, and newly allocated qubits are appended as the least significant.
//!
//! Besides single states, the protocol runner accepts arbitrary (unnormalized)
//! operators as inputs and never renormalizes after a measurement, which makes
//! every run a linear map. [`superoperator`] uses this to build the full
//! matrix of a program by feeding it the matrix units `|a><b|`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::engine::basis::{BasisInput, BasisState, InputValue};
use crate::lang::{Action, CheckedProgram, GateKind, ProcessTerm, Sort};
use crate::stabilizer::Tableau;

/// Largest number of qubits the oracle will hold.
pub const CAP: usize = 10;

/// Entry-wise tolerance for comparing matrices.
pub const TOLERANCE: f64 = 1e-9;

/// Branches whose operator has a smaller norm are dropped.
const ZERO_NORM: f64 = 1e-12;

pub type Matrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DenseError {
    #[error("{qubits} qubits exceed the dense simulation cap of {cap}")]
    Capacity { qubits: usize, cap: usize },
    #[error("operand {qubit} out of range for {n} qubits")]
    OperandOutOfRange { qubit: usize, n: usize },
    #[error("deadlock: stuck on [{}]", .0.join("; "))]
    Deadlock(Vec<String>),
    #[error("variable `{0}` is unbound at run time")]
    Unbound(String),
    #[error("forced outcomes: {0}")]
    ForcedOutcomes(String),
    #[error("expected {expected} input value(s), got {got}")]
    InputArity { expected: usize, got: usize },
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The 2x2 matrix of a single-qubit gate.
pub fn gate_matrix(kind: GateKind) -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    let entries = match kind {
        GateKind::H => [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)],
        GateKind::X => [o, l, l, o],
        GateKind::Y => [o, -i, i, o],
        GateKind::Z => [l, o, o, -l],
        GateKind::P => [l, o, o, i],
        GateKind::Cnot => panic!("CNOT is not a single-qubit gate"),
    };
    Matrix::from_row_slice(2, 2, &entries)
}

/// `|b><b|` for a basis state.
pub fn basis_density(b: BasisState) -> Matrix {
    let h = 0.5;
    let entries = match b {
        BasisState::Zero => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        BasisState::One => [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        BasisState::Plus => [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(h, 0.0)],
        BasisState::PlusI => [c(h, 0.0), c(0.0, -h), c(0.0, h), c(h, 0.0)],
    };
    Matrix::from_row_slice(2, 2, &entries)
}

/// Whether two matrices agree entry-wise within `tol`.
pub fn matrices_close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() <= tol)
}

/// An `n`-qubit operator, usually a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    m: Matrix,
}

impl DensityMatrix {
    /// `|0...0><0...0|`.
    pub fn zero_state(n: usize) -> Result<Self, DenseError> {
        check_cap(n)?;
        let d = 1usize << n;
        let mut m = Matrix::zeros(d, d);
        m[(0, 0)] = c(1.0, 0.0);
        Ok(DensityMatrix { n, m })
    }

    pub fn from_matrix(m: Matrix) -> Self {
        assert!(m.is_square() && m.nrows().is_power_of_two(), "matrix must be 2^n x 2^n");
        DensityMatrix {
            n: m.nrows().trailing_zeros() as usize,
            m,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    fn check_operand(&self, q: usize) -> Result<(), DenseError> {
        if q >= self.n {
            return Err(DenseError::OperandOutOfRange { qubit: q, n: self.n });
        }
        Ok(())
    }

    /// Append `other`'s qubits after this operator's (tensor product).
    pub fn append(&self, other: &Matrix) -> Result<Self, DenseError> {
        let added = other.nrows().trailing_zeros() as usize;
        check_cap(self.n + added)?;
        Ok(DensityMatrix {
            n: self.n + added,
            m: self.m.kronecker(other),
        })
    }

    /// Conjugate by `u` acting on qubit `q`.
    fn apply_single(&mut self, u: &Matrix, q: usize) {
        let b = self.bit(q);
        let d = self.m.nrows();
        let ud = u.adjoint();
        // rows: m <- u m
        for r in (0..d).filter(|r| r & b == 0) {
            for col in 0..d {
                let (a0, a1) = (self.m[(r, col)], self.m[(r | b, col)]);
                self.m[(r, col)] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                self.m[(r | b, col)] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
            }
        }
        // columns: m <- m u^dagger
        for col in (0..d).filter(|col| col & b == 0) {
            for r in 0..d {
                let (a0, a1) = (self.m[(r, col)], self.m[(r, col | b)]);
                self.m[(r, col)] = a0 * ud[(0, 0)] + a1 * ud[(1, 0)];
                self.m[(r, col | b)] = a0 * ud[(0, 1)] + a1 * ud[(1, 1)];
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (self.bit(control), self.bit(target));
        let perm = |i: usize| if i & cb != 0 { i ^ tb } else { i };
        let d = self.m.nrows();
        let old = self.m.clone();
        for r in 0..d {
            for col in 0..d {
                self.m[(perm(r), perm(col))] = old[(r, col)];
            }
        }
    }

    /// `U rho U^dagger` for the gate `kind` on `operands`.
    pub fn apply_gate(&mut self, kind: GateKind, operands: &[usize]) -> Result<(), DenseError> {
        for &q in operands {
            self.check_operand(q)?;
        }
        match (kind, operands) {
            (GateKind::Cnot, &[a, b]) if a != b => self.apply_cnot(a, b),
            (GateKind::Cnot, _) => panic!("CNOT needs two distinct operands"),
            (_, &[q]) => self.apply_single(&gate_matrix(kind), q),
            _ => panic!("{kind} takes one operand"),
        }
        Ok(())
    }

    /// `P rho P` for the projector onto `Z_q = (-1)^outcome`. Not normalized.
    pub fn project(&self, q: usize, outcome: bool) -> Result<Self, DenseError> {
        self.check_operand(q)?;
        let b = self.bit(q);
        let keep = |i: usize| (i & b != 0) == outcome;
        let mut m = self.m.clone();
        for r in 0..m.nrows() {
            for col in 0..m.ncols() {
                if !(keep(r) && keep(col)) {
                    m[(r, col)] = c(0.0, 0.0);
                }
            }
        }
        Ok(DensityMatrix { n: self.n, m })
    }

    /// Computational-basis measurement of qubit `q`: the outcomes with
    /// probability above `1e-12`, each with its renormalized post-state.
    pub fn measure_z(&self, q: usize) -> Result<Vec<(bool, f64, DensityMatrix)>, DenseError> {
        let mut out = Vec::new();
        for outcome in [false, true] {
            let p = self.project(q, outcome)?;
            let prob = p.trace().re;
            if prob > ZERO_NORM {
                out.push((outcome, prob, DensityMatrix { n: self.n, m: p.m.unscale(prob) }));
            }
        }
        Ok(out)
    }

    /// Trace out every qubit not in `keep`. Qubit `k` of the result is
    /// `keep[k]`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, DenseError> {
        for &q in keep {
            self.check_operand(q)?;
        }
        let k = keep.len();
        let kd = 1usize << k;
        let kept_mask: usize = keep.iter().map(|&q| self.bit(q)).sum();
        // deposit[j]: full index bits for reduced index j
        let deposit: Vec<usize> = (0..kd)
            .map(|j| {
                (0..k)
                    .filter(|&t| j >> (k - 1 - t) & 1 == 1)
                    .map(|t| self.bit(keep[t]))
                    .sum()
            })
            .collect();
        let mut out = Matrix::zeros(kd, kd);
        let d = self.m.nrows();
        for rest in (0..d).filter(|i| i & kept_mask == 0) {
            for (ri, &rd) in deposit.iter().enumerate() {
                for (ci, &cd) in deposit.iter().enumerate() {
                    out[(ri, ci)] += self.m[(rest | rd, rest | cd)];
                }
            }
        }
        Ok(DensityMatrix { n: k, m: out })
    }

    /// The projector `prod_i (I + g_i) / 2` onto the tableau's state.
    pub fn from_tableau(t: &Tableau) -> Result<Self, DenseError> {
        let n = t.num_qubits();
        check_cap(n)?;
        let d = 1usize << n;
        let mut m = Matrix::identity(d, d);
        for row in t.rows() {
            let bit = |q: usize| 1usize << (n - 1 - q);
            let xmask: usize = (0..n).filter(|&q| row.x_bit(q)).map(bit).sum();
            let zmask: usize = (0..n).filter(|&q| row.z_bit(q)).map(bit).sum();
            let ys = (0..n).filter(|&q| row.x_bit(q) && row.z_bit(q)).count();
            let base = c(0.0, 1.0).powu(ys as u32) * if row.is_negative() { -1.0 } else { 1.0 };
            // g|j> = base * (-1)^{|j & zmask|} |j ^ xmask>
            let coef = |j: usize| {
                if (j & zmask).count_ones() % 2 == 1 {
                    -base
                } else {
                    base
                }
            };
            let mut next = m.clone();
            for r in 0..d {
                let src = r ^ xmask;
                let k = coef(src);
                for col in 0..d {
                    next[(r, col)] += k * m[(src, col)];
                }
            }
            m = next.unscale(2.0);
        }
        Ok(DensityMatrix { n, m })
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        matrices_close(&self.m, &self.m.adjoint(), tol)
    }

    /// Smallest eigenvalue is at least `-tol` (assumes Hermitian).
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .all(|&e| e >= -tol)
    }

    /// Hermitian, unit trace and positive semidefinite.
    pub fn is_valid_state(&self) -> bool {
        self.is_hermitian(1e-12)
            && (self.trace() - c(1.0, 0.0)).norm() <= 1e-12
            && self.is_positive_semidefinite(1e-10)
    }

    pub fn approx_eq(&self, other: &DensityMatrix, tol: f64) -> bool {
        self.n == other.n && matrices_close(&self.m, &other.m, tol)
    }
}

fn check_cap(n: usize) -> Result<(), DenseError> {
    if n > CAP {
        return Err(DenseError::Capacity { qubits: n, cap: CAP });
    }
    Ok(())
}

/// Value given to one `input` action.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseInput {
    /// A one-qubit operator (2x2), not necessarily a state.
    Operator(Matrix),
    Bit(bool),
}

impl From<InputValue> for DenseInput {
    fn from(v: InputValue) -> Self {
        match v {
            InputValue::Qubit(b) => DenseInput::Operator(basis_density(b)),
            InputValue::Bit(b) => DenseInput::Bit(b),
        }
    }
}

/// A terminal branch of a dense run.
#[derive(Debug, Clone)]
pub struct DenseLeaf {
    pub outcomes: Vec<bool>,
    /// Bit outputs in declaration order.
    pub classical: Vec<bool>,
    /// Unnormalized operator on every allocated qubit.
    pub state: DensityMatrix,
    /// `state` reduced to the qubit outputs, in declaration order.
    pub output: DensityMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Qubit(usize),
    Bit(bool),
}

#[derive(Debug, Clone)]
struct Proc {
    term: Arc<ProcessTerm>,
    env: Vec<(String, Val)>,
}

impl Proc {
    fn get(&self, name: &str) -> Result<Val, DenseError> {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| DenseError::Unbound(name.to_string()))
    }

    fn qubit(&self, name: &str) -> Result<usize, DenseError> {
        match self.get(name)? {
            Val::Qubit(q) => Ok(q),
            Val::Bit(_) => Err(DenseError::Unbound(name.to_string())),
        }
    }

    fn head(&self) -> Option<&Action> {
        match self.term.as_ref() {
            ProcessTerm::Prefix { action, .. } => Some(action),
            _ => None,
        }
    }

    fn pop(&mut self) {
        if let ProcessTerm::Prefix { rest, .. } = self.term.as_ref() {
            self.term = rest.clone();
        }
    }
}

#[derive(Debug, Clone)]
struct Run {
    procs: Vec<Proc>,
    rho: DensityMatrix,
    outcomes: Vec<bool>,
    outputs: Vec<(usize, Val)>,
}

impl Run {
    fn flatten(&mut self) {
        let mut i = 0;
        while i < self.procs.len() {
            if let ProcessTerm::Parallel(l, r) = self.procs[i].term.as_ref() {
                let (l, r) = (l.clone(), r.clone());
                let env = self.procs[i].env.clone();
                self.procs[i].term = l;
                self.procs.insert(i + 1, Proc { term: r, env });
            } else {
                i += 1;
            }
        }
    }

    /// First enabled step: thread `i` alone, or thread `i` sending to `j`.
    fn next_step(&self) -> Option<(usize, Option<usize>)> {
        for (i, p) in self.procs.iter().enumerate() {
            match p.head() {
                None | Some(Action::Receive { .. }) => {}
                Some(Action::Send { channel, .. }) => {
                    let partner = self.procs.iter().enumerate().position(|(j, r)| {
                        j != i && matches!(r.head(), Some(Action::Receive { channel: ch, .. }) if ch == channel)
                    });
                    if let Some(j) = partner {
                        return Some((i, Some(j)));
                    }
                }
                Some(_) => return Some((i, None)),
            }
        }
        None
    }
}

struct Runner<'a> {
    program: &'a CheckedProgram,
    inputs: &'a [DenseInput],
    forced: Option<&'a [bool]>,
    leaves: Vec<DenseLeaf>,
}

impl Runner<'_> {
    fn gate(rho: &mut DensityMatrix, p: &Proc, action: &Action) -> Result<(), DenseError> {
        match action {
            Action::Gate { kind, operands } => {
                let qs = operands.iter().map(|v| p.qubit(v)).collect::<Result<Vec<_>, _>>()?;
                rho.apply_gate(*kind, &qs)
            }
            Action::If { cond, then } => match p.get(cond)? {
                Val::Bit(true) => Self::gate(rho, p, then),
                _ => Ok(()),
            },
            _ => unreachable!("only gates are guarded"),
        }
    }

    fn go(&mut self, mut run: Run) -> Result<(), DenseError> {
        loop {
            run.flatten();
            let Some((i, partner)) = run.next_step() else {
                if run.procs.iter().any(|p| !p.term.is_nil()) {
                    let heads = run
                        .procs
                        .iter()
                        .filter_map(|p| p.head().map(|a| a.to_string()))
                        .collect();
                    return Err(DenseError::Deadlock(heads));
                }
                return self.finish(run);
            };
            if let Some(j) = partner {
                let (Some(Action::Send { var, .. }), Some(Action::Receive { var: into, .. })) =
                    (run.procs[i].head().cloned(), run.procs[j].head().cloned())
                else {
                    unreachable!()
                };
                let v = run.procs[i].get(&var)?;
                run.procs[i].pop();
                run.procs[j].env.push((into, v));
                run.procs[j].pop();
                continue;
            }
            let action = run.procs[i].head().cloned().expect("enabled thread has a head");
            run.procs[i].pop();
            match &action {
                Action::NewQubit { var } => {
                    let q = run.rho.num_qubits();
                    run.rho = run.rho.append(&basis_density(BasisState::Zero))?;
                    run.procs[i].env.push((var.clone(), Val::Qubit(q)));
                }
                Action::Input { var, slot, .. } => {
                    let v = match &self.inputs[*slot] {
                        DenseInput::Operator(m) => {
                            let q = run.rho.num_qubits();
                            run.rho = run.rho.append(m)?;
                            Val::Qubit(q)
                        }
                        DenseInput::Bit(b) => Val::Bit(*b),
                    };
                    run.procs[i].env.push((var.clone(), v));
                }
                Action::Output { var, slot } => {
                    let v = run.procs[i].get(var)?;
                    run.outputs.push((*slot, v));
                }
                Action::Measure { target, qubit } => {
                    let q = run.procs[i].qubit(qubit)?;
                    let k = run.outcomes.len();
                    let wanted = match self.forced {
                        Some(f) => Some(*f.get(k).ok_or_else(|| {
                            DenseError::ForcedOutcomes(format!(
                                "only {} outcome(s) given but the run performs more measurements",
                                f.len()
                            ))
                        })?),
                        None => None,
                    };
                    let mut any = false;
                    for outcome in [false, true] {
                        if wanted.is_some_and(|w| w != outcome) {
                            continue;
                        }
                        let rho = run.rho.project(q, outcome)?;
                        if rho.matrix().norm() <= ZERO_NORM {
                            continue;
                        }
                        any = true;
                        let mut child = run.clone();
                        child.rho = rho;
                        child.outcomes.push(outcome);
                        child.procs[i].env.push((target.clone(), Val::Bit(outcome)));
                        self.go(child)?;
                    }
                    if !any && self.forced.is_some() {
                        return Err(DenseError::ForcedOutcomes(format!(
                            "outcome {} of measurement {} has probability zero",
                            wanted.unwrap_or_default() as u8,
                            k + 1
                        )));
                    }
                    return Ok(());
                }
                gate => Self::gate(&mut run.rho, &run.procs[i], gate)?,
            }
        }
    }

    fn finish(&mut self, run: Run) -> Result<(), DenseError> {
        if let Some(f) = self.forced {
            if f.len() != run.outcomes.len() {
                return Err(DenseError::ForcedOutcomes(format!(
                    "{} outcome(s) given but the run performs {} measurement(s)",
                    f.len(),
                    run.outcomes.len()
                )));
            }
        }
        let mut by_slot = vec![None; self.program.outputs.len()];
        for (slot, v) in &run.outputs {
            by_slot[*slot] = Some(*v);
        }
        let mut keep = Vec::new();
        let mut classical = Vec::new();
        for v in by_slot.into_iter().flatten() {
            match v {
                Val::Qubit(q) => keep.push(q),
                Val::Bit(b) => classical.push(b),
            }
        }
        let output = run.rho.partial_trace(&keep)?;
        self.leaves.push(DenseLeaf {
            outcomes: run.outcomes,
            classical,
            state: run.rho,
            output,
        });
        Ok(())
    }
}

/// Run `program` on `inputs` (one per declared input, in slot order),
/// following the sequential schedule. Without `forced` every measurement
/// outcome of non-zero weight is explored; with it, exactly that outcome
/// sequence is followed.
pub fn run(
    program: &CheckedProgram,
    inputs: &[DenseInput],
    forced: Option<&[bool]>,
) -> Result<Vec<DenseLeaf>, DenseError> {
    if inputs.len() != program.inputs.len() {
        return Err(DenseError::InputArity {
            expected: program.inputs.len(),
            got: inputs.len(),
        });
    }
    let mut runner = Runner {
        program,
        inputs,
        forced,
        leaves: Vec::new(),
    };
    runner.go(Run {
        procs: vec![Proc {
            term: Arc::new(program.body().clone()),
            env: Vec::new(),
        }],
        rho: DensityMatrix::zero_state(0)?,
        outcomes: Vec::new(),
        outputs: Vec::new(),
    })?;
    Ok(runner.leaves)
}

/// [`run`] on a basis input.
pub fn run_basis(
    program: &CheckedProgram,
    input: &BasisInput,
    forced: Option<&[bool]>,
) -> Result<Vec<DenseLeaf>, DenseError> {
    let inputs: Vec<DenseInput> = input.values.iter().map(|&v| v.into()).collect();
    run(program, &inputs, forced)
}

/// Sum of leaf outputs grouped by bit outputs: the program's output on the
/// given inputs.
pub fn mixture(
    program: &CheckedProgram,
    inputs: &[DenseInput],
) -> Result<BTreeMap<Vec<bool>, Matrix>, DenseError> {
    let mut out: BTreeMap<Vec<bool>, Matrix> = BTreeMap::new();
    for leaf in run(program, inputs, None)? {
        let m = leaf.output.into_matrix();
        match out.get_mut(&leaf.classical) {
            Some(acc) => *acc += m,
            None => {
                out.insert(leaf.classical, m);
            }
        }
    }
    Ok(out)
}

/// The full matrix of a program's superoperator. For every assignment of the
/// bit inputs and every matrix unit `|a><b|` on the qubit inputs, the output
/// operator for each value of the bit outputs.
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub qubit_inputs: usize,
    /// `(bit inputs, bit outputs)` to the output operator for each matrix
    /// unit, indexed by `a * 2^k + b`.
    pub entries: BTreeMap<(Vec<bool>, Vec<bool>), Vec<Matrix>>,
}

impl Superoperator {
    pub fn approx_eq(&self, other: &Superoperator, tol: f64) -> bool {
        if self.qubit_inputs != other.qubit_inputs {
            return false;
        }
        let is_zero = |ms: &Vec<Matrix>| ms.iter().all(|m| m.iter().all(|z| z.norm() <= tol));
        for (k, ms) in &self.entries {
            match other.entries.get(k) {
                Some(ns) => {
                    if ms.len() != ns.len() || !ms.iter().zip(ns).all(|(a, b)| matrices_close(a, b, tol)) {
                        return false;
                    }
                }
                None if is_zero(ms) => {}
                None => return false,
            }
        }
        other
            .entries
            .iter()
            .all(|(k, ns)| self.entries.contains_key(k) || is_zero(ns))
    }
}

/// Build the superoperator matrix of `program`.
pub fn superoperator(program: &CheckedProgram) -> Result<Superoperator, DenseError> {
    let sorts = program.input_sorts();
    let k = sorts.iter().filter(|s| **s == Sort::Qubit).count();
    let m = sorts.len() - k;
    let kd = 1usize << k;
    let mut entries: BTreeMap<(Vec<bool>, Vec<bool>), Vec<Matrix>> = BTreeMap::new();
    for bits in 0..1usize << m {
        let bit_values: Vec<bool> = (0..m).map(|t| bits >> (m - 1 - t) & 1 == 1).collect();
        for a in 0..kd {
            for b in 0..kd {
                let mut qi = 0;
                let mut bi = 0;
                let inputs: Vec<DenseInput> = sorts
                    .iter()
                    .map(|s| match s {
                        Sort::Qubit => {
                            let (ra, rb) = (a >> (k - 1 - qi) & 1, b >> (k - 1 - qi) & 1);
                            qi += 1;
                            let mut unit = Matrix::zeros(2, 2);
                            unit[(ra, rb)] = c(1.0, 0.0);
                            DenseInput::Operator(unit)
                        }
                        Sort::Bit => {
                            bi += 1;
                            DenseInput::Bit(bit_values[bi - 1])
                        }
                    })
                    .collect();
                for (outs, op) in mixture(program, &inputs)? {
                    let column = entries.entry((bit_values.clone(), outs)).or_insert_with(|| {
                        vec![Matrix::zeros(op.nrows(), op.ncols()); kd * kd]
                    });
                    column[a * kd + b] = op;
                }
            }
        }
    }
    Ok(Superoperator {
        qubit_inputs: k,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_term, tokenize, validate, Program};

    fn checked(src: &str) -> CheckedProgram {
        validate(&Program::new("T", parse_term(&tokenize(src).unwrap()).unwrap())).unwrap()
    }

    fn dm(n: usize, gates: &[(GateKind, &[usize])]) -> DensityMatrix {
        let mut d = DensityMatrix::zero_state(n).unwrap();
        for (g, ops) in gates {
            d.apply_gate(*g, ops).unwrap();
        }
        d
    }

    fn real(rows: usize, entries: &[f64]) -> Matrix {
        Matrix::from_iterator(rows, rows, entries.iter().map(|&e| c(e, 0.0))).transpose()
    }

    #[test]
    fn x_flips_zero() {
        let d = dm(1, &[(GateKind::X, &[0])]);
        assert!(matrices_close(d.matrix(), &real(2, &[0.0, 0.0, 0.0, 1.0]), 1e-12));
    }

    #[test]
    fn hadamard_gives_plus() {
        let d = dm(1, &[(GateKind::H, &[0])]);
        assert!(d.matrix().iter().all(|z| (z - c(0.5, 0.0)).norm() < 1e-12));
    }

    fn bell() -> Matrix {
        real(
            4,
            &[
                0.5, 0.0, 0.0, 0.5, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.5, 0.0, 0.0, 0.5,
            ],
        )
    }

    #[test]
    fn cnot_makes_bell_pair() {
        let d = dm(2, &[(GateKind::H, &[0]), (GateKind::Cnot, &[0, 1])]);
        assert!(matrices_close(d.matrix(), &bell(), 1e-12));
        assert!(d.is_valid_state());
    }

    #[test]
    fn phase_gate_maps_plus_to_plus_i() {
        let d = dm(1, &[(GateKind::H, &[0]), (GateKind::P, &[0])]);
        assert!(matrices_close(d.matrix(), &basis_density(BasisState::PlusI), 1e-12));
    }

    #[test]
    fn measure_plus() {
        let d = dm(1, &[(GateKind::H, &[0])]);
        let m = d.measure_z(0).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m[0].1 - 0.5).abs() < 1e-12 && (m[1].1 - 0.5).abs() < 1e-12);
        assert!(matrices_close(m[0].2.matrix(), &basis_density(BasisState::Zero), 1e-12));
        assert!(matrices_close(m[1].2.matrix(), &basis_density(BasisState::One), 1e-12));
        let z = DensityMatrix::zero_state(1).unwrap().measure_z(0).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_bell_gives_product_states() {
        let d = DensityMatrix::from_matrix(bell());
        let m = d.measure_z(0).unwrap();
        assert_eq!(m.len(), 2);
        let expect_11 = real(4, &[0.0; 15].iter().chain(&[1.0]).copied().collect::<Vec<_>>());
        assert!(matrices_close(m[1].2.matrix(), &expect_11, 1e-12));
    }

    #[test]
    fn partial_traces() {
        let d = DensityMatrix::from_matrix(bell());
        let half = d.partial_trace(&[1]).unwrap();
        assert!(matrices_close(half.matrix(), &real(2, &[0.5, 0.0, 0.0, 0.5]), 1e-12));
        assert!(d.partial_trace(&[0, 1]).unwrap().approx_eq(&d, 1e-12));
        let prod = dm(2, &[(GateKind::X, &[0]), (GateKind::H, &[1])]);
        let second = prod.partial_trace(&[1]).unwrap();
        assert!(matrices_close(second.matrix(), &basis_density(BasisState::Plus), 1e-12));
        let swapped = prod.partial_trace(&[1, 0]).unwrap();
        let expect = DensityMatrix::from_matrix(basis_density(BasisState::Plus))
            .append(&basis_density(BasisState::One))
            .unwrap();
        assert!(swapped.approx_eq(&expect, 1e-12));
    }

    #[test]
    fn projector_from_tableau() {
        let fresh = DensityMatrix::from_tableau(&Tableau::fresh(1)).unwrap();
        assert!(matrices_close(fresh.matrix(), &basis_density(BasisState::Zero), 1e-12));
        let plus = DensityMatrix::from_tableau(&Tableau::from_generators(&["+X"]).unwrap()).unwrap();
        assert!(matrices_close(plus.matrix(), &basis_density(BasisState::Plus), 1e-12));
        let y = DensityMatrix::from_tableau(&Tableau::from_generators(&["+Y"]).unwrap()).unwrap();
        assert!(matrices_close(y.matrix(), &basis_density(BasisState::PlusI), 1e-12));
        let b = DensityMatrix::from_tableau(&Tableau::from_generators(&["+XX", "+ZZ"]).unwrap()).unwrap();
        assert!(matrices_close(b.matrix(), &bell(), 1e-12));
    }

    #[test]
    fn capacity() {
        assert!(DensityMatrix::zero_state(CAP).is_ok());
        assert_eq!(
            DensityMatrix::zero_state(CAP + 1).unwrap_err(),
            DenseError::Capacity { qubits: CAP + 1, cap: CAP }
        );
    }

    #[test]
    fn identity_superoperator() {
        let id = superoperator(&checked("input x . output x . nil")).unwrap();
        let h = superoperator(&checked("input x . H(x) . H(x) . output x . nil")).unwrap();
        let z = superoperator(&checked("input x . Z(x) . output x . nil")).unwrap();
        assert!(id.approx_eq(&h, TOLERANCE));
        assert!(!id.approx_eq(&z, TOLERANCE));
    }

    #[test]
    fn dephasing_is_not_identity() {
        let id = superoperator(&checked("input x . output x . nil")).unwrap();
        let deph = superoperator(&checked(
            "input x . newqubit a . H(a) . m := measure a . if m then Z(x) . output x . nil",
        ))
        .unwrap();
        assert!(!id.approx_eq(&deph, TOLERANCE));
        let discard = superoperator(&checked(
            "input x . newqubit a . H(a) . m := measure a . output x . nil",
        ))
        .unwrap();
        assert!(id.approx_eq(&discard, TOLERANCE));
    }

    #[test]
    fn forced_run_follows_outcomes() {
        let p = checked("newqubit a . H(a) . newqubit b . CNOT(a,b) . m := measure a . n := measure b . nil");
        let leaves = run(&p, &[], Some(&[true, true])).unwrap();
        assert_eq!(leaves.len(), 1);
        assert!((leaves[0].state.trace().re - 0.5).abs() < 1e-12);
        assert!(run(&p, &[], Some(&[true, false])).is_err());
        assert!(run(&p, &[], Some(&[true])).is_err());
    }
}
