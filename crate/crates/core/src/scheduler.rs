//! Small-step execution of a checked program.
//!
//! A configuration holds the live threads, the shared stabilizer state and
//! each thread's variable bindings. In concurrent mode every enabled head
//! action of every thread is a possible next step, and a send fires jointly
//! with a matching receive on the same channel as one handshake step. In
//! sequential mode only the first enabled step (lowest thread index, sends
//! before the receiver index) fires, so each run follows one fixed schedule.
//! Measurements fork the run into one child per possible outcome.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::engine::basis::{BasisInput, InputValue};
use crate::lang::{Action, CheckedProgram, ProcessTerm, Sort};
use crate::stabilizer::{MeasurementOutcome, StabilizerError, Tableau};
use crate::weight::Weight;

/// Default cap on the number of configurations visited by one exploration.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Concurrent,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::Concurrent => "concurrent",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Mode::Sequential),
            "concurrent" => Ok(Mode::Concurrent),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("deadlock: no step enabled, stuck on [{}]", heads.join("; "))]
    Deadlock { heads: Vec<String> },
    #[error("exploration exceeded the node budget of {budget}")]
    Budget { budget: u64 },
    #[error("basis input {input} does not match the declared inputs {expected:?}")]
    InputMismatch { input: String, expected: Vec<Sort> },
    #[error("variable `{0}` is unbound at run time")]
    Unbound(String),
    #[error("forced outcomes: {0}")]
    ForcedOutcomes(String),
    #[error("exploration stopped by the caller")]
    Aborted,
    #[error(transparent)]
    Stabilizer(#[from] StabilizerError),
}

/// A run-time value bound to a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    /// Column index in the configuration's tableau.
    Qubit(usize),
    Bit(bool),
}

#[derive(Debug, Clone)]
pub struct Thread {
    pub term: Arc<ProcessTerm>,
    env: Vec<(Arc<str>, Value)>,
}

impl Thread {
    fn lookup(&self, name: &str) -> Result<Value, SchedulerError> {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| n.as_ref() == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| SchedulerError::Unbound(name.to_string()))
    }

    fn bind(&mut self, name: &str, value: Value) {
        self.env.push((Arc::from(name), value));
    }

    /// Drop the binding of a qubit that has left this thread.
    fn release(&mut self, name: &str) {
        if let Some(pos) = self.env.iter().rposition(|(n, _)| n.as_ref() == name) {
            if matches!(self.env[pos].1, Value::Qubit(_)) {
                self.env.remove(pos);
            }
        }
    }

    fn head(&self) -> Option<&Action> {
        match self.term.as_ref() {
            ProcessTerm::Prefix { action, .. } => Some(action),
            _ => None,
        }
    }

    fn advance(&mut self) {
        if let ProcessTerm::Prefix { rest, .. } = self.term.as_ref() {
            self.term = rest.clone();
        }
    }

    /// Qubit columns currently bound in this thread.
    pub fn qubit_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.env.iter().filter_map(|(_, v)| match v {
            Value::Qubit(q) => Some(*q),
            Value::Bit(_) => None,
        })
    }
}

/// One node of the execution tree.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub threads: Vec<Thread>,
    pub state: Tableau,
    pub weight: Weight,
    pub consumed_inputs: Vec<usize>,
    /// `(output slot, value)` in emission order.
    pub emitted_outputs: Vec<(usize, Value)>,
    pub outcomes: Vec<bool>,
}

impl Configuration {
    pub fn initial(program: &CheckedProgram) -> Self {
        let mut c = Configuration {
            threads: vec![Thread {
                term: Arc::new(program.body().clone()),
                env: Vec::new(),
            }],
            state: Tableau::fresh(0),
            weight: Weight::ONE,
            consumed_inputs: Vec::new(),
            emitted_outputs: Vec::new(),
            outcomes: Vec::new(),
        };
        c.split_parallel();
        c
    }

    /// Replace every thread whose term is a parallel composition by its two
    /// components; the right component becomes a new thread just after it.
    fn split_parallel(&mut self) {
        let mut i = 0;
        while i < self.threads.len() {
            if let ProcessTerm::Parallel(l, r) = self.threads[i].term.as_ref() {
                let (l, r) = (l.clone(), r.clone());
                let env = self.threads[i].env.clone();
                self.threads[i].term = l;
                self.threads.insert(i + 1, Thread { term: r, env });
            } else {
                i += 1;
            }
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.threads.iter().all(|t| t.term.is_nil())
    }

    /// Whether every qubit column is bound by at most one variable.
    pub fn qubit_env_injective(&self) -> bool {
        let mut seen = vec![false; self.state.num_qubits()];
        for q in self.threads.iter().flat_map(|t| t.qubit_columns()) {
            if std::mem::replace(&mut seen[q], true) {
                return false;
            }
        }
        true
    }

    fn heads(&self) -> Vec<String> {
        self.threads
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.head().map(|a| format!("t{i}: {a}")))
            .collect()
    }
}

/// A schedulable step: one thread's head action, or a send/receive handshake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Local(usize),
    Comm { sender: usize, receiver: usize },
}

/// One edge on a path through the execution tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathStep {
    pub step: Step,
    /// Set when the step was a measurement.
    pub outcome: Option<bool>,
}

/// Steps that can fire from `config`. Empty iff the configuration is
/// terminal; a non-terminal configuration without steps is a deadlock.
pub fn enabled_steps(config: &Configuration, mode: Mode) -> Result<Vec<Step>, SchedulerError> {
    let mut steps = Vec::new();
    for (i, t) in config.threads.iter().enumerate() {
        match t.head() {
            None | Some(Action::Receive { .. }) => {}
            Some(Action::Send { channel, .. }) => {
                for (j, u) in config.threads.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    if let Some(Action::Receive { channel: c, .. }) = u.head() {
                        if c == channel {
                            steps.push(Step::Comm { sender: i, receiver: j });
                        }
                    }
                }
            }
            Some(_) => steps.push(Step::Local(i)),
        }
        if mode == Mode::Sequential && !steps.is_empty() {
            steps.truncate(1);
            return Ok(steps);
        }
    }
    if steps.is_empty() && !config.is_terminal() {
        return Err(SchedulerError::Deadlock {
            heads: config.heads(),
        });
    }
    Ok(steps)
}

/// Short description of a step, for traces.
pub fn describe_step(config: &Configuration, step: Step) -> String {
    let head = |i: usize| {
        config.threads[i]
            .head()
            .map(|a| a.to_string())
            .unwrap_or_else(|| "nil".to_string())
    };
    match step {
        Step::Local(i) => format!("[t{i}] {}", head(i)),
        Step::Comm { sender, receiver } => {
            format!("[t{sender}->t{receiver}] {} / {}", head(sender), head(receiver))
        }
    }
}

fn apply_action(
    thread: &mut Thread,
    state: &mut Tableau,
    action: &Action,
) -> Result<(), SchedulerError> {
    match action {
        Action::Gate { kind, operands } => {
            let cols = operands
                .iter()
                .map(|v| match thread.lookup(v)? {
                    Value::Qubit(q) => Ok(q),
                    Value::Bit(_) => Err(SchedulerError::Unbound(v.clone())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            state.apply_gate(*kind, &cols)?;
            Ok(())
        }
        Action::If { cond, then } => match thread.lookup(cond)? {
            Value::Bit(true) => apply_action(thread, state, then),
            _ => Ok(()),
        },
        other => unreachable!("only gates are guarded, found `{other}`"),
    }
}

/// Fire `step`, returning the successor configurations with the measurement
/// outcome that produced each (if the step measured).
pub fn fire(
    config: &Configuration,
    step: Step,
    input: &BasisInput,
) -> Result<Vec<(Option<MeasurementOutcome>, Configuration)>, SchedulerError> {
    let mut next = config.clone();
    let mut children = Vec::with_capacity(1);
    match step {
        Step::Comm { sender, receiver } => {
            let (Some(Action::Send { var, .. }), Some(Action::Receive { var: into, .. })) =
                (config.threads[sender].head(), config.threads[receiver].head())
            else {
                unreachable!("communication step without matching send/receive heads");
            };
            let value = next.threads[sender].lookup(var)?;
            next.threads[sender].release(var);
            next.threads[sender].advance();
            next.threads[receiver].bind(into, value);
            next.threads[receiver].advance();
            children.push((None, next));
        }
        Step::Local(i) => {
            let action = config.threads[i]
                .head()
                .expect("local step on a thread with no head action");
            match action {
                Action::NewQubit { var } => {
                    let q = next.state.add_qubit();
                    next.threads[i].bind(var, Value::Qubit(q));
                    next.threads[i].advance();
                    children.push((None, next));
                }
                Action::Gate { .. } | Action::If { .. } => {
                    apply_action(&mut next.threads[i], &mut next.state, action)?;
                    next.threads[i].advance();
                    children.push((None, next));
                }
                Action::Input { var, slot, .. } => {
                    let value = *input.values.get(*slot).ok_or_else(|| {
                        SchedulerError::InputMismatch {
                            input: input.to_string(),
                            expected: Vec::new(),
                        }
                    })?;
                    let bound = match value {
                        InputValue::Qubit(b) => {
                            let q = next.state.add_qubit();
                            for &g in b.preparation() {
                                next.state.apply_gate(g, &[q])?;
                            }
                            Value::Qubit(q)
                        }
                        InputValue::Bit(v) => Value::Bit(v),
                    };
                    next.threads[i].bind(var, bound);
                    next.consumed_inputs.push(*slot);
                    next.threads[i].advance();
                    children.push((None, next));
                }
                Action::Output { var, slot } => {
                    let value = next.threads[i].lookup(var)?;
                    next.emitted_outputs.push((*slot, value));
                    next.threads[i].release(var);
                    next.threads[i].advance();
                    children.push((None, next));
                }
                Action::Measure { target, qubit } => {
                    let Value::Qubit(col) = next.threads[i].lookup(qubit)? else {
                        return Err(SchedulerError::Unbound(qubit.clone()));
                    };
                    next.threads[i].release(qubit);
                    next.threads[i].advance();
                    for (outcome, state) in next.state.measure(col)? {
                        let mut child = next.clone();
                        child.state = state;
                        child.weight = child.weight * outcome.probability;
                        child.threads[i].bind(target, Value::Bit(outcome.result));
                        child.outcomes.push(outcome.result);
                        children.push((Some(outcome), child));
                    }
                }
                Action::Send { .. } | Action::Receive { .. } => {
                    unreachable!("send/receive only fire as a handshake")
                }
            }
        }
    }
    for (_, c) in &mut children {
        c.split_parallel();
    }
    Ok(children)
}

fn check_input(program: &CheckedProgram, input: &BasisInput) -> Result<(), SchedulerError> {
    if input.sorts() != program.input_sorts() {
        return Err(SchedulerError::InputMismatch {
            input: input.to_string(),
            expected: program.input_sorts(),
        });
    }
    Ok(())
}

/// Totals from one exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExploreStats {
    /// Maximal paths, i.e. leaves of the execution tree.
    pub leaves: u64,
    /// Configurations visited, root included.
    pub nodes: u64,
}

struct Dfs<'a, F> {
    input: &'a BasisInput,
    mode: Mode,
    budget: u64,
    stats: ExploreStats,
    on_leaf: F,
}

impl<F> Dfs<'_, F>
where
    F: FnMut(&Configuration, &[PathStep]) -> Result<(), SchedulerError>,
{
    fn visit(&mut self, config: &Configuration, path: &mut Vec<PathStep>) -> Result<(), SchedulerError> {
        self.stats.nodes += 1;
        if self.stats.nodes > self.budget {
            return Err(SchedulerError::Budget { budget: self.budget });
        }
        debug_assert!(config.qubit_env_injective());
        let steps = enabled_steps(config, self.mode)?;
        if steps.is_empty() {
            self.stats.leaves += 1;
            return (self.on_leaf)(config, path);
        }
        for step in steps {
            for (outcome, child) in fire(config, step, self.input)? {
                path.push(PathStep {
                    step,
                    outcome: outcome.map(|o| o.result),
                });
                let r = self.visit(&child, path);
                path.pop();
                r?;
            }
        }
        Ok(())
    }
}

/// Depth-first exhaustive exploration, calling `on_leaf` for every terminal
/// configuration together with the path that reached it.
pub fn explore_with<F>(
    program: &CheckedProgram,
    input: &BasisInput,
    mode: Mode,
    budget: u64,
    on_leaf: F,
) -> Result<ExploreStats, SchedulerError>
where
    F: FnMut(&Configuration, &[PathStep]) -> Result<(), SchedulerError>,
{
    check_input(program, input)?;
    let mut dfs = Dfs {
        input,
        mode,
        budget,
        stats: ExploreStats::default(),
        on_leaf,
    };
    dfs.visit(&Configuration::initial(program), &mut Vec::new())?;
    Ok(dfs.stats)
}

/// A node of an [`ExecutionTree`].
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Label of the edge from the parent; empty for the root.
    pub label: String,
    pub children: Vec<usize>,
    pub config: Configuration,
}

/// The full execution tree. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct ExecutionTree {
    pub nodes: Vec<TreeNode>,
}

impl ExecutionTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    /// Number of maximal schedules (root-to-leaf paths).
    pub fn interleavings(&self) -> usize {
        self.leaves().count()
    }
}

/// Build the whole execution tree in memory. Meant for small programs; use
/// [`explore_with`] to stream leaves instead.
pub fn explore(
    program: &CheckedProgram,
    input: &BasisInput,
    mode: Mode,
    budget: u64,
) -> Result<ExecutionTree, SchedulerError> {
    check_input(program, input)?;
    let mut nodes = vec![TreeNode {
        parent: None,
        label: String::new(),
        children: Vec::new(),
        config: Configuration::initial(program),
    }];
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let config = nodes[id].config.clone();
        let steps = enabled_steps(&config, mode)?;
        let mut children = Vec::new();
        for step in steps {
            let label = describe_step(&config, step);
            for (outcome, child) in fire(&config, step, input)? {
                if nodes.len() as u64 >= budget {
                    return Err(SchedulerError::Budget { budget });
                }
                let label = match outcome {
                    Some(o) => format!("{label} => {}", o.result as u8),
                    None => label.clone(),
                };
                nodes.push(TreeNode {
                    parent: Some(id),
                    label,
                    children: Vec::new(),
                    config: child,
                });
                children.push(nodes.len() - 1);
            }
        }
        stack.extend(children.iter().rev());
        nodes[id].children = children;
    }
    Ok(ExecutionTree { nodes })
}

/// One fired step of a replayed run.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub label: String,
    pub state: Tableau,
}

/// Re-run the steps of `path` from the initial configuration.
pub fn replay(
    program: &CheckedProgram,
    input: &BasisInput,
    path: &[PathStep],
) -> Result<(Vec<TraceStep>, Configuration), SchedulerError> {
    check_input(program, input)?;
    let mut config = Configuration::initial(program);
    let mut trace = Vec::with_capacity(path.len());
    for ps in path {
        let label = describe_step(&config, ps.step);
        let children = fire(&config, ps.step, input)?;
        let (outcome, child) = children
            .into_iter()
            .find(|(o, _)| o.map(|o| o.result) == ps.outcome)
            .ok_or_else(|| SchedulerError::ForcedOutcomes(format!("outcome not possible at `{label}`")))?;
        let label = match outcome {
            Some(o) if o.deterministic => format!("{label} => {} (deterministic)", o.result as u8),
            Some(o) => format!("{label} => {} (p = {})", o.result as u8, o.probability),
            None => label,
        };
        trace.push(TraceStep {
            label,
            state: child.state.clone(),
        });
        config = child;
    }
    Ok((trace, config))
}

/// Run the sequential schedule, taking measurement results from `forced` in
/// order. Every measurement consumes one forced value, and all values must be
/// used.
pub fn simulate(
    program: &CheckedProgram,
    input: &BasisInput,
    forced: &[bool],
) -> Result<(Vec<TraceStep>, Configuration), SchedulerError> {
    check_input(program, input)?;
    let mut config = Configuration::initial(program);
    let mut path = Vec::new();
    let mut remaining = forced.iter();
    loop {
        let steps = enabled_steps(&config, Mode::Sequential)?;
        let Some(&step) = steps.first() else { break };
        let mut children = fire(&config, step, input)?;
        let child = if children[0].0.is_some() {
            let Some(&want) = remaining.next() else {
                return Err(SchedulerError::ForcedOutcomes(format!(
                    "only {} outcome(s) given but the run performs more measurements",
                    forced.len()
                )));
            };
            let label = describe_step(&config, step);
            let pos = children
                .iter()
                .position(|(o, _)| o.map(|o| o.result) == Some(want))
                .ok_or_else(|| {
                    SchedulerError::ForcedOutcomes(format!(
                        "outcome {} is impossible at `{label}`",
                        want as u8
                    ))
                })?;
            path.push(PathStep {
                step,
                outcome: Some(want),
            });
            children.swap_remove(pos).1
        } else {
            path.push(PathStep { step, outcome: None });
            children.pop().expect("non-measuring step has one child").1
        };
        config = child;
    }
    if remaining.next().is_some() {
        return Err(SchedulerError::ForcedOutcomes(format!(
            "{} outcome(s) given but the run performs only {} measurement(s)",
            forced.len(),
            path.iter().filter(|p| p.outcome.is_some()).count()
        )));
    }
    replay(program, input, &path)
}
