//! Stabilizer basis of one-qubit operator space and its enumeration.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::lang::{GateKind, Sort};

/// One of `|0>`, `|1>`, `|+>`, `|i>`. Their density matrices are linearly
/// independent and span the space of one-qubit operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisState {
    Zero,
    One,
    Plus,
    PlusI,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [
        BasisState::Zero,
        BasisState::One,
        BasisState::Plus,
        BasisState::PlusI,
    ];

    /// Gates that prepare this state from `|0>`.
    pub fn preparation(self) -> &'static [GateKind] {
        match self {
            BasisState::Zero => &[],
            BasisState::One => &[GateKind::X],
            BasisState::Plus => &[GateKind::H],
            BasisState::PlusI => &[GateKind::H, GateKind::P],
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BasisState::Zero => "0",
            BasisState::One => "1",
            BasisState::Plus => "+",
            BasisState::PlusI => "i",
        }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.symbol())
    }
}

/// The value supplied to one `input` action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputValue {
    Qubit(BasisState),
    Bit(bool),
}

impl InputValue {
    pub fn sort(self) -> Sort {
        match self {
            InputValue::Qubit(_) => Sort::Qubit,
            InputValue::Bit(_) => Sort::Bit,
        }
    }
}

impl fmt::Display for InputValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputValue::Qubit(b) => write!(f, "{b}"),
            InputValue::Bit(b) => write!(f, "{}", *b as u8),
        }
    }
}

/// Values for every declared input, indexed by input slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BasisInput {
    pub values: Vec<InputValue>,
}

impl BasisInput {
    pub fn new(values: Vec<InputValue>) -> Self {
        BasisInput { values }
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.values.iter().map(|v| v.sort()).collect()
    }

    /// Every assignment for the given input sorts: `4^k * 2^m` of them, in
    /// lexicographic order with the first input varying slowest.
    pub fn enumerate(sorts: &[Sort]) -> Vec<BasisInput> {
        let mut all = vec![BasisInput::default()];
        for sort in sorts {
            let choices: Vec<InputValue> = match sort {
                Sort::Qubit => BasisState::ALL.iter().map(|&b| InputValue::Qubit(b)).collect(),
                Sort::Bit => vec![InputValue::Bit(false), InputValue::Bit(true)],
            };
            all = all
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&c| {
                        let mut next = prefix.clone();
                        next.values.push(c);
                        next
                    })
                })
                .collect();
        }
        all
    }

    /// Parse a comma-separated list such as `+,1,i`. Qubit inputs accept
    /// `0 1 + i`, bit inputs `0 1`.
    pub fn parse_for(text: &str, sorts: &[Sort]) -> Result<BasisInput, String> {
        let items: Vec<&str> = if text.trim().is_empty() {
            Vec::new()
        } else {
            text.split(',').map(str::trim).collect()
        };
        if items.len() != sorts.len() {
            return Err(format!(
                "expected {} input value(s), got {}",
                sorts.len(),
                items.len()
            ));
        }
        let values = items
            .iter()
            .zip(sorts)
            .map(|(item, sort)| match sort {
                Sort::Qubit => item.parse::<BasisState>().map(InputValue::Qubit),
                Sort::Bit => match *item {
                    "0" => Ok(InputValue::Bit(false)),
                    "1" => Ok(InputValue::Bit(true)),
                    other => Err(format!("bad bit value {other:?}")),
                },
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BasisInput { values })
    }
}

impl FromStr for BasisState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches('|').trim_end_matches('>') {
            "0" => Ok(BasisState::Zero),
            "1" => Ok(BasisState::One),
            "+" => Ok(BasisState::Plus),
            "i" | "+i" => Ok(BasisState::PlusI),
            other => Err(format!("bad basis state {other:?} (expected 0, 1, + or i)")),
        }
    }
}

impl fmt::Display for BasisInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for BasisInput {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
