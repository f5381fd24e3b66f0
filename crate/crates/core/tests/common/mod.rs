#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use qeck_core::bench::{read_header, scan, Header, IMPLEMENTATION, SPECIFICATION};
use qeck_core::lang::{load_definition, validate, Action, CheckedProgram, GateKind, Program};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub struct CorpusProtocol {
    pub file: String,
    pub header: Header,
    pub implementation: Program,
    pub specification: Program,
}

impl CorpusProtocol {
    pub fn name(&self) -> &str {
        self.header.name.as_deref().unwrap_or(&self.file)
    }

    pub fn checked(&self) -> (CheckedProgram, CheckedProgram) {
        (
            validate(&self.implementation).unwrap(),
            validate(&self.specification).unwrap(),
        )
    }
}

/// Every available corpus protocol, in file order.
pub fn corpus() -> Vec<CorpusProtocol> {
    scan(&corpus_dir())
        .unwrap()
        .into_iter()
        .filter_map(|path| {
            let source = fs::read_to_string(&path).unwrap();
            let header = read_header(&source);
            if header.unavailable {
                return None;
            }
            Some(CorpusProtocol {
                file: path.file_name().unwrap().to_string_lossy().into_owned(),
                implementation: load_definition(&source, IMPLEMENTATION).unwrap(),
                specification: load_definition(&source, SPECIFICATION).unwrap(),
                header,
            })
        })
        .collect()
}

pub fn corpus_protocol(name: &str) -> CorpusProtocol {
    corpus()
        .into_iter()
        .find(|p| p.name() == name)
        .unwrap_or_else(|| panic!("no corpus protocol {name}"))
}

fn is_gate_like(a: &Action) -> bool {
    matches!(a, Action::Gate { .. } | Action::If { .. })
}

fn innermost_cnot(a: &Action) -> Option<&Vec<String>> {
    match a {
        Action::Gate {
            kind: GateKind::Cnot,
            operands,
        } => Some(operands),
        Action::If { then, .. } => innermost_cnot(then),
        _ => None,
    }
}

fn swap_cnot(a: &Action) -> Action {
    match a {
        Action::Gate { kind, operands } => Action::Gate {
            kind: *kind,
            operands: operands.iter().rev().cloned().collect(),
        },
        Action::If { cond, then } => Action::If {
            cond: cond.clone(),
            then: Box::new(swap_cnot(then)),
        },
        other => other.clone(),
    }
}

/// Single-gate deletions (guarded gates included) and CNOT operand swaps.
pub fn mutants(program: &Program) -> Vec<(String, Program)> {
    let actions: Vec<(Action, _)> = program
        .body
        .actions()
        .into_iter()
        .map(|(a, s)| (a.clone(), s))
        .collect();
    let mut out = Vec::new();
    for (target, (action, span)) in actions.iter().enumerate() {
        if is_gate_like(action) {
            let mut k = 0;
            let body = program.body.map_actions(&mut |a, _| {
                let keep = k != target;
                k += 1;
                keep.then(|| a.clone())
            });
            out.push((format!("delete `{action}` at {span}"), Program::new(program.name.clone(), body)));
        }
        if innermost_cnot(action).is_some() {
            let mut k = 0;
            let body = program.body.map_actions(&mut |a, _| {
                let hit = k == target;
                k += 1;
                Some(if hit { swap_cnot(a) } else { a.clone() })
            });
            out.push((format!("swap operands of `{action}` at {span}"), Program::new(program.name.clone(), body)));
        }
    }
    out
}

/// A random Clifford gate on `n` qubits.
pub fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> (GateKind, Vec<usize>) {
    let kinds = [GateKind::H, GateKind::P, GateKind::X, GateKind::Y, GateKind::Z, GateKind::Cnot];
    let kind = if n < 2 {
        kinds[rng.gen_range(0..5)]
    } else {
        kinds[rng.gen_range(0..6)]
    };
    if kind == GateKind::Cnot {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        (kind, vec![a, b])
    } else {
        (kind, vec![rng.gen_range(0..n)])
    }
}

fn gate_text(kind: GateKind, ops: &[usize], names: &[&str]) -> String {
    let ops: Vec<&str> = ops.iter().map(|&q| names[q]).collect();
    format!("{}({})", kind.name(), ops.join(","))
}

/// A pair of single-process programs over `k` qubit inputs. The
/// specification is a random Clifford circuit. The implementation is the
/// same circuit rewritten with identities and a corrected one-bit
/// teleportation of an input (so it measures and branches), and with
/// probability 1/2 one extra random gate is inserted somewhere.
pub fn random_pair(rng: &mut ChaCha8Rng, k: usize) -> (Program, Program) {
    let names = ["x0", "x1"];
    let names = &names[..k];
    let gates: Vec<(GateKind, Vec<usize>)> = (0..rng.gen_range(1..8)).map(|_| random_gate(rng, k)).collect();
    let inputs: String = names.iter().map(|v| format!("input {v} . ")).collect();
    let outputs: String = names.iter().map(|v| format!("output {v} . ")).collect();
    let spec_body: String = gates.iter().map(|(g, o)| format!("{} . ", gate_text(*g, o, names))).collect();
    let spec = format!("{inputs}{spec_body}{outputs}nil");

    let mut impl_parts: Vec<String> = Vec::new();
    for (g, o) in &gates {
        let text = gate_text(*g, o, names);
        match (g, rng.gen_range(0..4)) {
            (GateKind::Z, 0) => impl_parts.push(format!("P({0}) . P({0})", names[o[0]])),
            (_, 1) => impl_parts.push(format!("{text} . {text} . {text}")),
            (GateKind::P, 2) => impl_parts.push(format!("Z({0}) . P({0}) . P({0}) . P({0})", names[o[0]])),
            _ => impl_parts.push(text),
        }
    }
    // X-teleport input 0 through a fresh ancilla and swap the names back.
    let t = rng.gen_range(0..=impl_parts.len());
    impl_parts.insert(
        t,
        format!(
            "newqubit t . CNOT({0},t) . H({0}) . m := measure {0} . if m then Z(t) . newqubit {0} . CNOT(t,{0}) . CNOT({0},t) . CNOT(t,{0})",
            names[0]
        ),
    );
    if rng.gen_bool(0.5) {
        let (g, o) = random_gate(rng, k);
        let at = rng.gen_range(0..=impl_parts.len());
        impl_parts.insert(at, gate_text(g, &o, names));
    }
    let implementation = format!("{inputs}{} . {outputs}nil", impl_parts.join(" . "));
    let parse = |name: &str, text: &str| load_definition(&format!("{name} = {text}"), name).unwrap();
    (parse("Implementation", &implementation), parse("Specification", &spec))
}

use qeck_core::dense::{DensityMatrix, TOLERANCE};
use qeck_core::stabilizer::Tableau;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random stabilizer state on `n` qubits and the gates that made it.
pub fn random_tableau(rng: &mut ChaCha8Rng, n: usize, gates: usize) -> (Tableau, Vec<(GateKind, Vec<usize>)>) {
    let mut t = Tableau::fresh(n);
    let mut log = Vec::new();
    for _ in 0..gates {
        let (g, ops) = random_gate(rng, n);
        t.apply_gate(g, &ops).unwrap();
        log.push((g, ops));
    }
    (t, log)
}

/// Run one random circuit of up to 6 qubits and 40 operations on both
/// simulators, measuring now and then with the outcome chosen at random among
/// the possible ones. After every operation the tableau must satisfy its
/// invariants and its projector must match the normalized density matrix.
pub fn differential_run(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=6);
    let ops = rng.gen_range(1..=40);
    let mut t = Tableau::fresh(n);
    let mut d = DensityMatrix::zero_state(n).unwrap();
    for step in 0..ops {
        if rng.gen_bool(0.2) {
            let q = rng.gen_range(0..n);
            let branches = t.measure(q).unwrap();
            let (outcome, next) = branches[rng.gen_range(0..branches.len())].clone();
            let projected = d.project(q, outcome.result).unwrap();
            let p = projected.trace().re;
            if (p - outcome.probability.to_f64()).abs() > TOLERANCE {
                return Err(format!("seed {seed} step {step}: probability {p} vs {}", outcome.probability));
            }
            t = next;
            d = DensityMatrix::from_matrix(projected.matrix().unscale(p));
        } else {
            let (g, o) = random_gate(&mut rng, n);
            t.apply_gate(g, &o).unwrap();
            d.apply_gate(g, &o).unwrap();
        }
        t.check_invariants().map_err(|e| format!("seed {seed} step {step}: {e}"))?;
        let projector = DensityMatrix::from_tableau(&t).unwrap();
        if !projector.approx_eq(&d, TOLERANCE) {
            return Err(format!("seed {seed} step {step}: states differ\n{t}"));
        }
    }
    Ok(())
}

/// A pair of states that are equal about half of the time: the second is the
/// first with a random element of its stabilizer applied (no change), or with
/// a random extra gate or Pauli error (usually a change).
pub fn random_state_pair(seed: u64) -> (Tableau, Tableau) {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=5);
    let gates = rng.gen_range(0..30);
    let (a, _) = random_tableau(&mut rng, n, gates);
    let mut b = a.clone();
    if rng.gen_bool(0.5) {
        let mut element = qeck_core::stabilizer::PauliString::identity(n);
        for row in a.rows() {
            if rng.gen_bool(0.5) {
                element.mul_assign(&row);
            }
        }
        for q in 0..n {
            let g = match element.get(q) {
                'X' => GateKind::X,
                'Y' => GateKind::Y,
                'Z' => GateKind::Z,
                _ => continue,
            };
            b.apply_gate(g, &[q]).unwrap();
        }
    } else {
        let (g, o) = random_gate(&mut rng, n);
        b.apply_gate(g, &o).unwrap();
    }
    (a, b)
}

/// Oracle verdict on two tableaux: equal density matrices.
pub fn oracle_equal(a: &Tableau, b: &Tableau) -> bool {
    DensityMatrix::from_tableau(a)
        .unwrap()
        .approx_eq(&DensityMatrix::from_tableau(b).unwrap(), TOLERANCE)
}

use qeck_core::dense;
use qeck_core::engine::BasisInput;
use qeck_core::scheduler::{explore_with, Configuration, Mode, Value, DEFAULT_NODE_BUDGET};

/// Tableau columns of a leaf's qubit outputs and its bit outputs, both in
/// declaration order.
pub fn leaf_outputs(leaf: &Configuration) -> (Vec<usize>, Vec<bool>) {
    let mut emitted = leaf.emitted_outputs.clone();
    emitted.sort_by_key(|(slot, _)| *slot);
    let mut cols = Vec::new();
    let mut bits = Vec::new();
    for (_, v) in emitted {
        match v {
            Value::Qubit(q) => cols.push(q),
            Value::Bit(b) => bits.push(b),
        }
    }
    (cols, bits)
}

/// Replay every sequential leaf of `program` in the dense simulator with the
/// same measurement outcomes. The dense branch must have trace equal to the
/// leaf weight and, once normalized, the same output state and bits.
/// Returns the number of leaves compared.
pub fn leaves_match_dense(program: &CheckedProgram) -> Result<u64, String> {
    let mut compared = 0;
    for input in BasisInput::enumerate(&program.input_sorts()) {
        let mut failure = None;
        explore_with(program, &input, Mode::Sequential, DEFAULT_NODE_BUDGET, |leaf, _| {
            if failure.is_some() {
                return Ok(());
            }
            compared += 1;
            let fail = |msg: String| Some(format!("{} on {input}, outcomes {:?}: {msg}", program.name(), leaf.outcomes));
            let dense_leaves = match dense::run_basis(program, &input, Some(&leaf.outcomes)) {
                Ok(l) => l,
                Err(e) => {
                    failure = fail(e.to_string());
                    return Ok(());
                }
            };
            let [d] = dense_leaves.as_slice() else {
                failure = fail(format!("{} dense branches", dense_leaves.len()));
                return Ok(());
            };
            let p = d.state.trace().re;
            let (cols, bits) = leaf_outputs(leaf);
            if (p - leaf.weight.to_f64()).abs() > TOLERANCE {
                failure = fail(format!("dense probability {p}, weight {}", leaf.weight.to_f64()));
            } else if d.classical != bits {
                failure = fail(format!("bits {:?} vs {bits:?}", d.classical));
            } else {
                let reduced = leaf.state.subset_separable(&cols).expect("separable output");
                let expected = DensityMatrix::from_tableau(&reduced).unwrap();
                let got = DensityMatrix::from_matrix(d.output.matrix().unscale(p));
                if !expected.approx_eq(&got, TOLERANCE) {
                    failure = fail("output states differ".to_string());
                }
            }
            Ok(())
        })
        .map_err(|e| format!("{}: {e}", program.name()))?;
        if let Some(f) = failure {
            return Err(f);
        }
    }
    Ok(compared)
}

/// Whether the dense oracle gives the two programs the same superoperator.
pub fn oracle_equivalent(a: &CheckedProgram, b: &CheckedProgram) -> bool {
    dense::superoperator(a)
        .unwrap()
        .approx_eq(&dense::superoperator(b).unwrap(), TOLERANCE)
}

/// `p` with the first occurrence of `from` in its printed form replaced.
pub fn rewrite(p: &Program, from: &str, to: &str) -> Program {
    let text = format!("{} = {}", p.name, p.body);
    let changed = text.replacen(from, to, 1);
    assert_ne!(text, changed, "pattern {from:?} not found");
    load_definition(&changed, &p.name).unwrap()
}
