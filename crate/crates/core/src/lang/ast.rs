//! Abstract syntax of the protocol language.

use std::fmt;
use std::sync::Arc;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// What a variable or channel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Qubit,
    Bit,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Qubit => "qubit",
            Sort::Bit => "bit",
        })
    }
}

/// The Clifford gate set of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    /// Phase gate `S = diag(1, i)`.
    P,
    Cnot,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::P,
        GateKind::Cnot,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::P => "P",
            GateKind::Cnot => "CNOT",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|g| g.name() == name)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single prefix action.
///
/// `slot` on `Input` and `Output` is the declaration index of that action in
/// source order. The parser assigns it and validation renumbers it, so it is
/// only meaningful on a checked program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    NewQubit {
        var: String,
    },
    Gate {
        kind: GateKind,
        operands: Vec<String>,
    },
    Send {
        channel: String,
        var: String,
    },
    Receive {
        channel: String,
        var: String,
    },
    Measure {
        target: String,
        qubit: String,
    },
    Input {
        var: String,
        sort: Sort,
        slot: usize,
    },
    Output {
        var: String,
        slot: usize,
    },
    /// `if cond then <action>`: the guarded action fires only when `cond` is 1.
    If {
        cond: String,
        then: Box<Action>,
    },
}

impl Action {
    pub fn is_gate(&self) -> bool {
        matches!(self, Action::Gate { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::NewQubit { var } => write!(f, "newqubit {var}"),
            Action::Gate { kind, operands } => write!(f, "{kind}({})", operands.join(",")),
            Action::Send { channel, var } => write!(f, "{channel}!{var}"),
            Action::Receive { channel, var } => write!(f, "{channel}?{var}"),
            Action::Measure { target, qubit } => write!(f, "{target} := measure {qubit}"),
            Action::Input { var, sort, .. } => match sort {
                Sort::Qubit => write!(f, "input {var}"),
                Sort::Bit => write!(f, "input {var}:bit"),
            },
            Action::Output { var, .. } => write!(f, "output {var}"),
            Action::If { cond, then } => write!(f, "if {cond} then {then}"),
        }
    }
}

/// A process term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcessTerm {
    Nil,
    Prefix {
        action: Action,
        span: Span,
        rest: Arc<ProcessTerm>,
    },
    Parallel(Arc<ProcessTerm>, Arc<ProcessTerm>),
}

impl ProcessTerm {
    pub fn prefix(action: Action, rest: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Prefix {
            action,
            span: Span::default(),
            rest: Arc::new(rest),
        }
    }

    pub fn parallel(left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Parallel(Arc::new(left), Arc::new(right))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, ProcessTerm::Nil)
    }

    /// Copy of the term with every span reset, for comparing shapes.
    pub fn without_spans(&self) -> ProcessTerm {
        match self {
            ProcessTerm::Nil => ProcessTerm::Nil,
            ProcessTerm::Prefix { action, rest, .. } => {
                ProcessTerm::prefix(action.clone(), rest.without_spans())
            }
            ProcessTerm::Parallel(l, r) => ProcessTerm::parallel(l.without_spans(), r.without_spans()),
        }
    }

    /// Every prefix action in source order, with its span.
    pub fn actions(&self) -> Vec<(&Action, Span)> {
        let mut out = Vec::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions<'a>(&'a self, out: &mut Vec<(&'a Action, Span)>) {
        match self {
            ProcessTerm::Nil => {}
            ProcessTerm::Prefix { action, span, rest } => {
                out.push((action, *span));
                rest.collect_actions(out);
            }
            ProcessTerm::Parallel(l, r) => {
                l.collect_actions(out);
                r.collect_actions(out);
            }
        }
    }

    /// Rebuild the term, replacing each action by `f(action)`.
    /// Returning `None` deletes the prefix.
    pub fn map_actions<F>(&self, f: &mut F) -> ProcessTerm
    where
        F: FnMut(&Action, Span) -> Option<Action>,
    {
        match self {
            ProcessTerm::Nil => ProcessTerm::Nil,
            ProcessTerm::Prefix { action, span, rest } => {
                let mapped = f(action, *span);
                let rest = rest.map_actions(f);
                match mapped {
                    Some(action) => ProcessTerm::Prefix {
                        action,
                        span: *span,
                        rest: Arc::new(rest),
                    },
                    None => rest,
                }
            }
            ProcessTerm::Parallel(l, r) => {
                let l = l.map_actions(f);
                let r = r.map_actions(f);
                ProcessTerm::parallel(l, r)
            }
        }
    }
}

impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTerm::Nil => f.write_str("nil"),
            ProcessTerm::Prefix { action, rest, .. } => {
                write!(f, "{action} . ")?;
                match rest.as_ref() {
                    ProcessTerm::Parallel(..) => write!(f, "({rest})"),
                    _ => write!(f, "{rest}"),
                }
            }
            ProcessTerm::Parallel(l, r) => {
                write!(f, "{l} | ")?;
                match r.as_ref() {
                    ProcessTerm::Parallel(..) => write!(f, "({r})"),
                    _ => write!(f, "{r}"),
                }
            }
        }
    }
}

/// A named top-level definition, `Name = term`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub body: ProcessTerm,
}

impl Program {
    pub fn new(name: impl Into<String>, body: ProcessTerm) -> Self {
        Program {
            name: name.into(),
            body,
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.body)
    }
}

/// All definitions found in one protocol file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceFile {
    pub definitions: Vec<Program>,
}

impl SourceFile {
    pub fn get(&self, name: &str) -> Option<&Program> {
        self.definitions.iter().find(|d| d.name == name)
    }
}
