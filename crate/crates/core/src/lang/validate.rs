//! Static checks on a parsed program.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::{Action, GateKind, ProcessTerm, Program, Sort, Span};

/// The rule a program broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Binding,
    ChannelSort,
    GateArity,
    Linearity,
    Guard,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Binding => "binding",
            Rule::ChannelSort => "channel sort",
            Rule::GateArity => "gate arity",
            Rule::Linearity => "linearity",
            Rule::Guard => "guard",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {rule} violation: {message}")]
pub struct ValidationError {
    pub rule: Rule,
    pub message: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDecl {
    pub var: String,
    pub sort: Sort,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputDecl {
    pub var: String,
    pub sort: Sort,
    pub span: Span,
}

/// A program that passed [`validate`]. Input and output slots in the body are
/// numbered in source order and index `inputs` / `outputs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedProgram {
    pub program: Program,
    pub inputs: Vec<InputDecl>,
    pub outputs: Vec<OutputDecl>,
    pub channels: BTreeMap<String, Sort>,
}

impl CheckedProgram {
    pub fn name(&self) -> &str {
        &self.program.name
    }

    pub fn body(&self) -> &ProcessTerm {
        &self.program.body
    }

    pub fn input_sorts(&self) -> Vec<Sort> {
        self.inputs.iter().map(|d| d.sort).collect()
    }

    pub fn output_sorts(&self) -> Vec<Sort> {
        self.outputs.iter().map(|d| d.sort).collect()
    }

    /// Upper bound on the number of qubits a run allocates.
    pub fn qubit_allocations(&self) -> usize {
        fn count(a: &Action) -> usize {
            match a {
                Action::NewQubit { .. } => 1,
                Action::Input {
                    sort: Sort::Qubit, ..
                } => 1,
                Action::If { then, .. } => count(then),
                _ => 0,
            }
        }
        self.program
            .body
            .actions()
            .iter()
            .map(|(a, _)| count(a))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Consumed {
    Sent,
    Measured,
    Output,
}

#[derive(Debug, Clone)]
struct Binding {
    name: String,
    /// `None` only while channel sorts are still being inferred.
    sort: Option<Sort>,
    id: usize,
    consumed: Option<(Consumed, String)>,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    bindings: Vec<Binding>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().rev().find(|b| b.name == name)
    }

    fn lookup_mut(&mut self, name: &str) -> Option<&mut Binding> {
        self.bindings.iter_mut().rev().find(|b| b.name == name)
    }
}

struct Checker {
    strict: bool,
    channels: BTreeMap<String, Sort>,
    next_id: usize,
    inputs: Vec<InputDecl>,
    outputs: Vec<OutputDecl>,
}

type Check<T = ()> = Result<T, ValidationError>;

fn err(rule: Rule, span: Span, message: impl Into<String>) -> ValidationError {
    ValidationError {
        rule,
        message: message.into(),
        span,
    }
}

impl Checker {
    fn new(strict: bool, channels: BTreeMap<String, Sort>) -> Self {
        Checker {
            strict,
            channels,
            next_id: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn fail(&self, e: ValidationError) -> Check {
        if self.strict {
            Err(e)
        } else {
            Ok(())
        }
    }

    fn bind(&mut self, scope: &mut Scope, name: &str, sort: Option<Sort>, span: Span) -> Check {
        if let Some(prev) = scope.lookup(name) {
            if prev.sort == Some(Sort::Qubit) && prev.consumed.is_none() {
                self.fail(err(
                    Rule::Linearity,
                    span,
                    format!("qubit `{name}` is rebound while still live"),
                ))?;
            }
        }
        scope.bindings.push(Binding {
            name: name.to_string(),
            sort,
            id: self.next_id,
            consumed: None,
        });
        self.next_id += 1;
        Ok(())
    }

    /// Resolve a use of `name`; `Ok(None)` when the sort is not yet known.
    fn use_var(
        &mut self,
        scope: &Scope,
        name: &str,
        span: Span,
        used: &mut HashSet<usize>,
    ) -> Check<Option<Sort>> {
        let Some(b) = scope.lookup(name) else {
            self.fail(err(
                Rule::Binding,
                span,
                format!("variable `{name}` is not bound in this thread"),
            ))?;
            return Ok(None);
        };
        if let Some((how, detail)) = &b.consumed {
            let why = match how {
                Consumed::Sent => format!("after send on channel `{detail}`"),
                Consumed::Measured => "after measurement".to_string(),
                Consumed::Output => "after output".to_string(),
            };
            self.fail(err(
                Rule::Linearity,
                span,
                format!("qubit `{name}` used {why}"),
            ))?;
        }
        used.insert(b.id);
        Ok(b.sort)
    }

    fn use_qubit(
        &mut self,
        scope: &Scope,
        name: &str,
        span: Span,
        used: &mut HashSet<usize>,
        role: &str,
    ) -> Check {
        if let Some(Sort::Bit) = self.use_var(scope, name, span, used)? {
            self.fail(err(
                Rule::Binding,
                span,
                format!("`{name}` is a bit, {role} must be a qubit"),
            ))?;
        }
        Ok(())
    }

    fn consume(scope: &mut Scope, name: &str, how: Consumed, detail: &str) {
        if let Some(b) = scope.lookup_mut(name) {
            if b.sort == Some(Sort::Qubit) {
                b.consumed = Some((how, detail.to_string()));
            }
        }
    }

    fn term(&mut self, term: &ProcessTerm, mut scope: Scope, used: &mut HashSet<usize>) -> Check {
        match term {
            ProcessTerm::Nil => Ok(()),
            ProcessTerm::Prefix { action, span, rest } => {
                self.action(action, *span, &mut scope, used)?;
                self.term(rest, scope, used)
            }
            ProcessTerm::Parallel(l, r) => {
                let (mut left_used, mut right_used) = (HashSet::new(), HashSet::new());
                self.term(l, scope.clone(), &mut left_used)?;
                self.term(r, scope.clone(), &mut right_used)?;
                for b in &scope.bindings {
                    if b.sort == Some(Sort::Qubit)
                        && left_used.contains(&b.id)
                        && right_used.contains(&b.id)
                    {
                        let span = first_span(r);
                        self.fail(err(
                            Rule::Linearity,
                            span,
                            format!(
                                "qubit `{}` is used on both sides of a parallel composition",
                                b.name
                            ),
                        ))?;
                    }
                }
                used.extend(left_used);
                used.extend(right_used);
                Ok(())
            }
        }
    }

    fn action(
        &mut self,
        action: &Action,
        span: Span,
        scope: &mut Scope,
        used: &mut HashSet<usize>,
    ) -> Check {
        match action {
            Action::NewQubit { var } => self.bind(scope, var, Some(Sort::Qubit), span),
            Action::Gate { kind, operands } => {
                if operands.len() != kind.arity() {
                    self.fail(err(
                        Rule::GateArity,
                        span,
                        format!(
                            "gate {kind} takes {} operand{}, found {}",
                            kind.arity(),
                            if kind.arity() == 1 { "" } else { "s" },
                            operands.len()
                        ),
                    ))?;
                }
                if *kind == GateKind::Cnot && operands.len() == 2 && operands[0] == operands[1] {
                    self.fail(err(
                        Rule::GateArity,
                        span,
                        format!("CNOT operands must be distinct (`{}` given twice)", operands[0]),
                    ))?;
                }
                for op in operands {
                    self.use_qubit(scope, op, span, used, "a gate operand")?;
                }
                Ok(())
            }
            Action::Send { channel, var } => {
                let sort = self.use_var(scope, var, span, used)?;
                if let Some(sort) = sort {
                    match self.channels.get(channel) {
                        None => {
                            self.channels.insert(channel.clone(), sort);
                        }
                        Some(&expected) if expected != sort => {
                            self.fail(err(
                                Rule::ChannelSort,
                                span,
                                format!(
                                    "channel `{channel}` carries {expected}s but `{var}` is a {sort}"
                                ),
                            ))?;
                        }
                        Some(_) => {}
                    }
                }
                Self::consume(scope, var, Consumed::Sent, channel);
                Ok(())
            }
            Action::Receive { channel, var } => {
                let sort = self.channels.get(channel).copied();
                if sort.is_none() {
                    self.fail(err(
                        Rule::ChannelSort,
                        span,
                        format!("channel `{channel}` is never sent on"),
                    ))?;
                }
                self.bind(scope, var, sort, span)
            }
            Action::Measure { target, qubit } => {
                self.use_qubit(scope, qubit, span, used, "the measured variable")?;
                Self::consume(scope, qubit, Consumed::Measured, "");
                self.bind(scope, target, Some(Sort::Bit), span)
            }
            Action::Input { var, sort, .. } => {
                self.inputs.push(InputDecl {
                    var: var.clone(),
                    sort: *sort,
                    span,
                });
                self.bind(scope, var, Some(*sort), span)
            }
            Action::Output { var, .. } => {
                let sort = self.use_var(scope, var, span, used)?;
                self.outputs.push(OutputDecl {
                    var: var.clone(),
                    sort: sort.unwrap_or(Sort::Qubit),
                    span,
                });
                Self::consume(scope, var, Consumed::Output, "");
                Ok(())
            }
            Action::If { cond, then } => {
                if let Some(Sort::Qubit) = self.use_var(scope, cond, span, used)? {
                    self.fail(err(
                        Rule::Guard,
                        span,
                        format!("condition `{cond}` must be a bit"),
                    ))?;
                }
                if !matches!(then.as_ref(), Action::Gate { .. } | Action::If { .. }) {
                    self.fail(err(
                        Rule::Guard,
                        span,
                        format!("only gates may be guarded, found `{then}`"),
                    ))?;
                }
                self.action(then, span, scope, used)
            }
        }
    }
}

fn first_span(term: &ProcessTerm) -> Span {
    term.actions().first().map(|(_, s)| *s).unwrap_or_default()
}

fn renumber_slots(term: &ProcessTerm) -> ProcessTerm {
    let (mut next_in, mut next_out) = (0, 0);
    term.map_actions(&mut |action, _| {
        Some(match action {
            Action::Input { var, sort, .. } => {
                next_in += 1;
                Action::Input {
                    var: var.clone(),
                    sort: *sort,
                    slot: next_in - 1,
                }
            }
            Action::Output { var, .. } => {
                next_out += 1;
                Action::Output {
                    var: var.clone(),
                    slot: next_out - 1,
                }
            }
            other => other.clone(),
        })
    })
}

/// Enforce binding, channel-sort, gate-arity and qubit-linearity rules.
///
/// Channel sorts are inferred: the first send whose variable has a known sort
/// fixes the sort of its channel. Inference is iterated because a sent
/// variable may itself have been received on another channel.
pub fn validate(program: &Program) -> Result<CheckedProgram, ValidationError> {
    let mut channels = BTreeMap::new();
    loop {
        let mut infer = Checker::new(false, channels.clone());
        infer.term(&program.body, Scope::default(), &mut HashSet::new())?;
        if infer.channels == channels {
            break;
        }
        channels = infer.channels;
    }

    let mut strict = Checker::new(true, channels);
    strict.term(&program.body, Scope::default(), &mut HashSet::new())?;

    Ok(CheckedProgram {
        program: Program::new(program.name.clone(), renumber_slots(&program.body)),
        inputs: strict.inputs,
        outputs: strict.outputs,
        channels: strict.channels,
    })
}
