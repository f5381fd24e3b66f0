//! Equivalence checking by linearity.
//!
//! Both programs are run on every stabilizer basis input. A program's
//! behaviour on one input is the set of its leaves: the weight of the branch,
//! the reduced state of the declared qubit outputs and the values of the
//! declared bit outputs. The implementation matches the specification when,
//! for every basis input, every implementation leaf has the specification's
//! (single) output. Since superoperators are linear and the basis inputs span
//! operator space, agreement on the basis extends to all inputs.

pub mod basis;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use basis::{BasisInput, BasisState, InputValue};

use crate::dense;
use crate::lang::{validate, CheckedProgram, FrontendError, Program};
use crate::scheduler::{
    explore_with, replay, Configuration, ExploreStats, Mode, PathStep, SchedulerError, Step,
    Value, DEFAULT_NODE_BUDGET,
};
use crate::stabilizer::Tableau;
use crate::weight::Weight;

/// Statement of the comparison criterion, included in every report.
pub const CRITERION: &str = "per-branch pure-state equality: every implementation branch must \
produce the specification's output state and classical outputs";

/// Justification included with an Equivalent verdict.
pub const JUSTIFICATION: &str = "the basis inputs |0>, |1>, |+>, |i> (and their tensor products) \
span operator space, so two linear superoperators that agree on all of them agree everywhere";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("{program}: input {input}: {source}")]
    Scheduler {
        program: String,
        input: String,
        #[source]
        source: SchedulerError,
    },
    #[error("{program}: input {input}: output qubits are entangled with discarded qubits after [{}]", trace.join("; "))]
    Separability {
        program: String,
        input: String,
        trace: Vec<String>,
    },
    #[error(transparent)]
    Dense(#[from] dense::DenseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub mode: Mode,
    /// Node budget for each exploration (one program, one basis input).
    pub budget: u64,
    /// On NotEquivalent, also compare weighted mixtures with the dense oracle.
    pub refine_mixture: bool,
    /// Explore basis inputs on the rayon pool.
    pub parallel: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            mode: Mode::Sequential,
            budget: DEFAULT_NODE_BUDGET,
            refine_mixture: false,
            parallel: true,
        }
    }
}

/// Leaves with the same weight and outputs, merged.
#[derive(Debug, Clone)]
pub struct Branch {
    pub weight: Weight,
    /// Canonical reduced state of the qubit outputs, in declaration order.
    pub state: Tableau,
    /// Bit outputs in declaration order.
    pub classical: Vec<bool>,
    /// Number of leaves merged into this entry.
    pub multiplicity: u64,
    /// Path to the first such leaf.
    pub witness: Vec<PathStep>,
    pub outcomes: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub input: BasisInput,
    pub branches: Vec<Branch>,
    pub stats: ExploreStats,
}

impl TableRow {
    /// Sum of leaf weights. Every schedule contributes exactly 1.
    pub fn total_weight(&self) -> BigRational {
        self.branches.iter().fold(BigRational::from_integer(0.into()), |acc, b| {
            acc + b.weight.to_ratio() * BigRational::from_integer(b.multiplicity.into())
        })
    }

    /// Whether all leaves agree on their outputs.
    pub fn is_deterministic(&self) -> bool {
        self.branches
            .windows(2)
            .all(|w| w[0].state == w[1].state && w[0].classical == w[1].classical)
    }
}

/// The finite description of a program's superoperator: its leaves on every
/// basis input.
#[derive(Debug, Clone)]
pub struct SuperoperatorTable {
    pub program: Arc<CheckedProgram>,
    pub mode: Mode,
    pub rows: Vec<TableRow>,
}

impl SuperoperatorTable {
    pub fn leaves(&self) -> u64 {
        self.rows.iter().map(|r| r.stats.leaves).sum()
    }

    pub fn nodes(&self) -> u64 {
        self.rows.iter().map(|r| r.stats.nodes).sum()
    }
}

/// Qubit columns and bit values of the declared outputs at a leaf.
fn leaf_outputs(program: &CheckedProgram, leaf: &Configuration) -> (Vec<usize>, Vec<bool>) {
    let mut by_slot: Vec<Option<Value>> = vec![None; program.outputs.len()];
    for &(slot, v) in &leaf.emitted_outputs {
        by_slot[slot] = Some(v);
    }
    let mut qubits = Vec::new();
    let mut bits = Vec::new();
    for v in by_slot {
        match v.expect("every output fires exactly once on a terminating run") {
            Value::Qubit(q) => qubits.push(q),
            Value::Bit(b) => bits.push(b),
        }
    }
    (qubits, bits)
}

fn trace_labels(program: &CheckedProgram, input: &BasisInput, path: &[PathStep]) -> Vec<String> {
    match replay(program, input, path) {
        Ok((trace, _)) => trace.into_iter().map(|t| t.label).collect(),
        Err(e) => vec![format!("<replay failed: {e}>")],
    }
}

fn run_input(
    program: &CheckedProgram,
    input: &BasisInput,
    mode: Mode,
    budget: u64,
) -> Result<TableRow, EngineError> {
    let mut branches: Vec<Branch> = Vec::new();
    let mut index: HashMap<(Weight, Tableau, Vec<bool>), usize> = HashMap::new();
    let mut entangled: Option<Vec<PathStep>> = None;
    let result = explore_with(program, input, mode, budget, |leaf, path| {
        let (cols, classical) = leaf_outputs(program, leaf);
        let Some(state) = leaf.state.subset_separable(&cols) else {
            entangled = Some(path.to_vec());
            return Err(SchedulerError::Aborted);
        };
        let key = (leaf.weight, state, classical);
        match index.get(&key) {
            Some(&i) => branches[i].multiplicity += 1,
            None => {
                index.insert(key.clone(), branches.len());
                branches.push(Branch {
                    weight: key.0,
                    state: key.1,
                    classical: key.2,
                    multiplicity: 1,
                    witness: path.to_vec(),
                    outcomes: leaf.outcomes.clone(),
                });
            }
        }
        Ok(())
    });
    if let Some(path) = entangled {
        return Err(EngineError::Separability {
            program: program.name().to_string(),
            input: input.to_string(),
            trace: trace_labels(program, input, &path),
        });
    }
    let stats = result.map_err(|source| EngineError::Scheduler {
        program: program.name().to_string(),
        input: input.to_string(),
        source,
    })?;
    Ok(TableRow {
        input: input.clone(),
        branches,
        stats,
    })
}

/// Explore `program` on every basis input for its declared inputs.
pub fn run_protocol(
    program: &CheckedProgram,
    options: &CheckOptions,
) -> Result<SuperoperatorTable, EngineError> {
    let inputs = BasisInput::enumerate(&program.input_sorts());
    let run = |input: &BasisInput| run_input(program, input, options.mode, options.budget);
    let rows: Result<Vec<TableRow>, EngineError> = if options.parallel {
        inputs.par_iter().map(run).collect()
    } else {
        inputs.iter().map(run).collect()
    };
    Ok(SuperoperatorTable {
        program: Arc::new(program.clone()),
        mode: options.mode,
        rows: rows?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

impl Verdict {
    /// Process exit status for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Equivalent => 0,
            Verdict::NotEquivalent => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equivalent => "Equivalent",
            Verdict::NotEquivalent => "NotEquivalent",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDetail {
    pub input: BasisInput,
    /// Implementation leaves on this input.
    pub branches: u64,
    pub matched: u64,
    pub mismatched: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub input: BasisInput,
    pub trace: Vec<String>,
    pub outcomes: Vec<bool>,
    pub implementation_state: Vec<String>,
    pub specification_state: Vec<String>,
    pub implementation_outputs: Vec<bool>,
    pub specification_outputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Statistics {
    pub basis_inputs: usize,
    /// Implementation leaves summed over basis inputs: interleavings in
    /// concurrent mode, branches in sequential mode.
    pub implementation_leaves: u64,
    pub implementation_nodes: u64,
    pub specification_leaves: u64,
}

/// Result of comparing weighted mixtures with the dense oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixtureRefinement {
    pub performed: bool,
    pub superoperators_equal: Option<bool>,
    pub note: String,
}

/// Wall-clock phases in milliseconds. Not part of the structured report so
/// that it stays byte-identical across runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub implementation_ms: f64,
    pub specification_ms: f64,
    pub compare_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub implementation: String,
    pub specification: String,
    pub mode: Mode,
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub criterion: &'static str,
    pub justification: Option<&'static str>,
    pub statistics: Option<Statistics>,
    pub inputs: Vec<InputDetail>,
    pub counterexample: Option<Counterexample>,
    pub mixture: Option<MixtureRefinement>,
    #[serde(skip)]
    pub timings: Timings,
}

impl EquivalenceReport {
    fn inconclusive(implementation: &str, specification: &str, mode: Mode, reason: String) -> Self {
        EquivalenceReport {
            implementation: implementation.to_string(),
            specification: specification.to_string(),
            mode,
            verdict: Verdict::Inconclusive,
            reason: Some(reason),
            criterion: CRITERION,
            justification: None,
            statistics: None,
            inputs: Vec::new(),
            counterexample: None,
            mixture: None,
            timings: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable rendering, including timings.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "implementation: {}", self.implementation);
        let _ = writeln!(s, "specification:  {}", self.specification);
        let _ = writeln!(s, "mode:           {}", self.mode);
        let _ = writeln!(s, "verdict:        {}", self.verdict);
        if let Some(r) = &self.reason {
            let _ = writeln!(s, "reason:         {r}");
        }
        let _ = writeln!(s, "criterion:      {}", self.criterion);
        if let Some(st) = &self.statistics {
            let label = match self.mode {
                Mode::Sequential => "branches",
                Mode::Concurrent => "interleavings",
            };
            let _ = writeln!(s, "basis inputs:   {}", st.basis_inputs);
            let _ = writeln!(s, "{label:<15} {}", st.implementation_leaves);
            let _ = writeln!(
                s,
                "time (ms):      impl {:.2}, spec {:.2}, compare {:.2}",
                self.timings.implementation_ms, self.timings.specification_ms, self.timings.compare_ms
            );
        }
        for d in self.inputs.iter().filter(|d| d.mismatched > 0) {
            let _ = writeln!(
                s,
                "  input {}: {} of {} branch(es) differ",
                d.input, d.mismatched, d.branches
            );
        }
        if let Some(c) = &self.counterexample {
            let _ = writeln!(s, "counterexample on input {}:", c.input);
            for step in &c.trace {
                let _ = writeln!(s, "    {step}");
            }
            let outcomes: Vec<String> = c.outcomes.iter().map(|&b| (b as u8).to_string()).collect();
            let _ = writeln!(s, "  outcomes:       [{}]", outcomes.join(", "));
            let _ = writeln!(s, "  implementation: {{{}}} {:?}", c.implementation_state.join(", "), c.implementation_outputs);
            let _ = writeln!(s, "  specification:  {{{}}} {:?}", c.specification_state.join(", "), c.specification_outputs);
        }
        if let Some(m) = &self.mixture {
            let _ = writeln!(s, "mixture refinement: {}", m.note);
        }
        if let Some(j) = self.justification {
            let _ = writeln!(s, "justification:  {j}");
        }
        s
    }
}

/// Compare two tables. Never fails: every problem becomes a verdict.
pub fn compare(implementation: &SuperoperatorTable, specification: &SuperoperatorTable) -> EquivalenceReport {
    let (ip, sp) = (&implementation.program, &specification.program);
    let mode = implementation.mode;
    if ip.input_sorts() != sp.input_sorts() {
        return EquivalenceReport::inconclusive(
            ip.name(),
            sp.name(),
            mode,
            format!("input sorts differ: {:?} vs {:?}", ip.input_sorts(), sp.input_sorts()),
        );
    }
    if ip.output_sorts() != sp.output_sorts() {
        return EquivalenceReport::inconclusive(
            ip.name(),
            sp.name(),
            mode,
            format!("output sorts differ: {:?} vs {:?}", ip.output_sorts(), sp.output_sorts()),
        );
    }
    if let Some(row) = specification.rows.iter().find(|r| !r.is_deterministic()) {
        return EquivalenceReport::inconclusive(
            ip.name(),
            sp.name(),
            mode,
            format!("specification has branch-dependent outputs on input {}", row.input),
        );
    }

    let mut inputs = Vec::with_capacity(implementation.rows.len());
    let mut counterexample = None;
    for (irow, srow) in implementation.rows.iter().zip(&specification.rows) {
        debug_assert_eq!(irow.input, srow.input);
        let expected = &srow.branches[0];
        let mut detail = InputDetail {
            input: irow.input.clone(),
            branches: irow.stats.leaves,
            matched: 0,
            mismatched: 0,
        };
        for b in &irow.branches {
            let same = b.classical == expected.classical
                && b.state.states_equal(&expected.state).unwrap_or(false);
            if same {
                detail.matched += b.multiplicity;
            } else {
                detail.mismatched += b.multiplicity;
                if counterexample.is_none() {
                    counterexample = Some(Counterexample {
                        input: irow.input.clone(),
                        trace: trace_labels(ip, &irow.input, &b.witness),
                        outcomes: b.outcomes.clone(),
                        implementation_state: b.state.dump(),
                        specification_state: expected.state.dump(),
                        implementation_outputs: b.classical.clone(),
                        specification_outputs: expected.classical.clone(),
                    });
                }
            }
        }
        inputs.push(detail);
    }
    let verdict = if counterexample.is_some() {
        Verdict::NotEquivalent
    } else {
        Verdict::Equivalent
    };
    EquivalenceReport {
        implementation: ip.name().to_string(),
        specification: sp.name().to_string(),
        mode,
        verdict,
        reason: None,
        criterion: CRITERION,
        justification: (verdict == Verdict::Equivalent).then_some(JUSTIFICATION),
        statistics: Some(Statistics {
            basis_inputs: implementation.rows.len(),
            implementation_leaves: implementation.leaves(),
            implementation_nodes: implementation.nodes(),
            specification_leaves: specification.leaves(),
        }),
        inputs,
        counterexample,
        mixture: None,
        timings: Timings::default(),
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Check `implementation` against `specification`. Programs that fail
/// validation give an Inconclusive report; run-time failures (deadlock,
/// entangled outputs, budget) are errors.
pub fn check(
    implementation: &Program,
    specification: &Program,
    options: &CheckOptions,
) -> Result<EquivalenceReport, EngineError> {
    let checked = |p: &Program| validate(p).map_err(|e| format!("{}: {e}", p.name));
    let (ip, sp) = match (checked(implementation), checked(specification)) {
        (Ok(i), Ok(s)) => (i, s),
        (Err(e), _) | (_, Err(e)) => {
            return Ok(EquivalenceReport::inconclusive(
                &implementation.name,
                &specification.name,
                options.mode,
                e,
            ))
        }
    };
    check_programs(&ip, &sp, options)
}

/// [`check`] for already validated programs.
pub fn check_programs(
    implementation: &CheckedProgram,
    specification: &CheckedProgram,
    options: &CheckOptions,
) -> Result<EquivalenceReport, EngineError> {
    if implementation.input_sorts() != specification.input_sorts()
        || implementation.output_sorts() != specification.output_sorts()
    {
        let empty = |p: &CheckedProgram| SuperoperatorTable {
            program: Arc::new(p.clone()),
            mode: options.mode,
            rows: Vec::new(),
        };
        return Ok(compare(&empty(implementation), &empty(specification)));
    }
    let t = Instant::now();
    let itable = run_protocol(implementation, options)?;
    let implementation_ms = elapsed_ms(t);
    let t = Instant::now();
    let stable = run_protocol(specification, options)?;
    let specification_ms = elapsed_ms(t);
    let t = Instant::now();
    let mut report = compare(&itable, &stable);
    if report.verdict == Verdict::NotEquivalent {
        report.mixture = Some(if options.refine_mixture {
            refine_mixture(implementation, specification)
        } else {
            MixtureRefinement {
                performed: false,
                superoperators_equal: None,
                note: "branches disagree; a weighted-mixture comparison (--refine-mixture) may refine this verdict".to_string(),
            }
        });
    }
    report.timings = Timings {
        implementation_ms,
        specification_ms,
        compare_ms: elapsed_ms(t),
    };
    Ok(report)
}

fn refine_mixture(implementation: &CheckedProgram, specification: &CheckedProgram) -> MixtureRefinement {
    let result = dense::superoperator(implementation).and_then(|i| {
        dense::superoperator(specification).map(|s| i.approx_eq(&s, dense::TOLERANCE))
    });
    match result {
        Ok(equal) => MixtureRefinement {
            performed: true,
            superoperators_equal: Some(equal),
            note: if equal {
                "weighted mixtures agree: the programs induce the same superoperator".to_string()
            } else {
                "weighted mixtures also differ: the programs induce different superoperators".to_string()
            },
        },
        Err(e) => MixtureRefinement {
            performed: false,
            superoperators_equal: None,
            note: format!("not performed: {e}"),
        },
    }
}

/// Sum of leaf weights for every schedule (sequence of steps, ignoring
/// measurement outcomes) on one input, in schedule order.
pub fn schedule_weight_sums(
    program: &CheckedProgram,
    input: &BasisInput,
    mode: Mode,
    budget: u64,
) -> Result<Vec<BigRational>, SchedulerError> {
    let mut sums: BTreeMap<Vec<Step>, BigRational> = BTreeMap::new();
    explore_with(program, input, mode, budget, |leaf, path| {
        let key: Vec<Step> = path.iter().map(|p| p.step).collect();
        *sums.entry(key).or_insert_with(|| BigRational::from_integer(0.into())) += leaf.weight.to_ratio();
        Ok(())
    })?;
    Ok(sums.into_values().collect())
}

/// Whether every schedule on `input` yields the same multiset of
/// `(weight, reduced output state, bit outputs)` leaves.
pub fn schedules_agree(
    program: &CheckedProgram,
    input: &BasisInput,
    mode: Mode,
    budget: u64,
) -> Result<bool, SchedulerError> {
    type Leaf = (u32, Vec<String>, Vec<bool>);
    let mut per_schedule: BTreeMap<Vec<Step>, Vec<Leaf>> = BTreeMap::new();
    explore_with(program, input, mode, budget, |leaf, path| {
        let (cols, classical) = leaf_outputs(program, leaf);
        let state = leaf
            .state
            .subset_separable(&cols)
            .map(|t| t.dump())
            .unwrap_or_else(|| vec!["<entangled>".to_string()]);
        let key: Vec<Step> = path.iter().map(|p| p.step).collect();
        per_schedule
            .entry(key)
            .or_default()
            .push((leaf.weight.halvings(), state, classical));
        Ok(())
    })?;
    let mut multisets = per_schedule.into_values().map(|mut v| {
        v.sort();
        v
    });
    let Some(first) = multisets.next() else {
        return Ok(true);
    };
    Ok(multisets.all(|m| m == first))
}

/// True iff every schedule's leaf weights sum to exactly one.
pub fn weights_sum_to_one(sums: &[BigRational]) -> bool {
    sums.iter().all(One::is_one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_term, tokenize};

    fn program(src: &str) -> Program {
        Program::new("P", parse_term(&tokenize(src).unwrap()).unwrap())
    }

    const IDENTITY: &str = "input x . output x . nil";

    #[test]
    fn identity_table() {
        let p = validate(&program(IDENTITY)).unwrap();
        let t = run_protocol(&p, &CheckOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 4);
        let expected = ["+Z", "-Z", "+X", "+Y"];
        for (row, want) in t.rows.iter().zip(expected) {
            assert_eq!(row.branches.len(), 1);
            assert!(row.branches[0].weight.is_one());
            assert_eq!(row.branches[0].state.dump(), [want]);
        }
    }

    #[test]
    fn reflexive() {
        let p = program(IDENTITY);
        for mode in [Mode::Sequential, Mode::Concurrent] {
            let opts = CheckOptions { mode, ..Default::default() };
            assert_eq!(check(&p, &p, &opts).unwrap().verdict, Verdict::Equivalent);
        }
    }

    #[test]
    fn hadamard_is_not_identity() {
        let r = check(&program("input x . H(x) . output x . nil"), &program(IDENTITY), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotEquivalent);
        let c = r.counterexample.unwrap();
        assert_eq!(c.input.to_string(), "(|0>)");
        assert_eq!(c.implementation_state, ["+X"]);
        assert_eq!(c.specification_state, ["+Z"]);
    }

    #[test]
    fn unbound_output_is_inconclusive() {
        let r = check(&program("input x . output y . nil"), &program(IDENTITY), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn sort_mismatch_is_inconclusive() {
        let r = check(&program("input x:bit . output x . nil"), &program(IDENTITY), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.reason.unwrap().contains("input sorts"));
    }

    #[test]
    fn entangled_output_is_an_error() {
        let p = program("input x . newqubit a . H(a) . CNOT(a,x) . output x . nil");
        let err = check(&p, &program(IDENTITY), &CheckOptions::default()).unwrap_err();
        assert!(matches!(err, EngineError::Separability { .. }), "{err}");
    }

    #[test]
    fn measured_ancilla_is_discarded() {
        let p = program("input x . newqubit a . H(a) . m := measure a . output x . nil");
        let r = check(&p, &program(IDENTITY), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert_eq!(r.statistics.unwrap().implementation_leaves, 8);
    }

    #[test]
    fn report_json_has_no_timings() {
        let p = program(IDENTITY);
        let r = check(&p, &p, &CheckOptions::default()).unwrap();
        let json = r.to_json();
        assert!(json.contains("\"verdict\": \"Equivalent\""));
        assert!(!json.contains("_ms"));
        assert!(r.to_text().contains("time (ms)"));
    }
}
