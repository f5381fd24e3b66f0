//! Exact branch probabilities.
//!
//! Every stabilizer measurement outcome has probability 1 or 1/2, so the
//! weight of any branch is `2^-k` for the number `k` of random measurements
//! on its path. Sums of weights are taken in exact rationals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Weight {
    halvings: u32,
}

impl Weight {
    pub const ONE: Weight = Weight { halvings: 0 };
    pub const HALF: Weight = Weight { halvings: 1 };

    pub fn from_halvings(halvings: u32) -> Self {
        Weight { halvings }
    }

    pub fn halvings(self) -> u32 {
        self.halvings
    }

    pub fn halve(self) -> Self {
        Weight {
            halvings: self.halvings + 1,
        }
    }

    pub fn is_one(self) -> bool {
        self.halvings == 0
    }

    pub fn to_ratio(self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.halvings as usize)
    }

    pub fn to_f64(self) -> f64 {
        0.5f64.powi(self.halvings as i32)
    }
}

impl std::ops::Mul for Weight {
    type Output = Weight;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Weight) -> Weight {
        Weight {
            halvings: self.halvings + rhs.halvings,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.halvings == 0 {
            f.write_str("1")
        } else {
            write!(f, "1/{}", BigInt::one() << self.halvings as usize)
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Exact sum of a collection of weights.
pub fn total<'a>(weights: impl IntoIterator<Item = &'a Weight>) -> BigRational {
    weights
        .into_iter()
        .fold(BigRational::zero(), |acc, w| acc + w.to_ratio())
}
