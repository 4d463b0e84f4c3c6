//! Symbolic execution over the IR.
//!
//! Values are linear expressions over the symbolic inputs, or `Opaque` once a
//! non-linear operation mixes symbolic operands. Path conditions are checked
//! by the interval-propagation solver in [`solver`]; every satisfiability
//! check that misses the cache is counted as one query.

mod engine;
pub mod solver;

use std::collections::BTreeMap;
use std::fmt;

use crate::ir::CmpOp;

pub use engine::{
    select_next_state, symex_campaign, symex_campaign_with, Strategy, SymResult, SymState, SymexConfig, SymexError,
    SymexLimits, Termination, TestCase, DEFAULT_MAX_INPUTS,
};
pub use solver::{solve, SolveResult, Solver, SolverStats, ENUMERATION_CAP};

/// `constant + sum(coeff * x_var)` with wrap-around int32 coefficients.
/// Terms are kept sorted by variable with no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    constant: i32,
    terms: BTreeMap<u32, i32>,
}

impl LinExpr {
    pub fn constant(c: i32) -> Self {
        Self {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(index: u32) -> Self {
        Self {
            constant: 0,
            terms: BTreeMap::from([(index, 1)]),
        }
    }

    pub fn constant_term(&self) -> i32 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, i32)> + '_ {
        self.terms.iter().map(|(v, c)| (*v, *c))
    }

    pub fn as_constant(&self) -> Option<i32> {
        self.terms.is_empty().then_some(self.constant)
    }

    fn combine(&self, other: &LinExpr, sign: i32) -> LinExpr {
        let mut out = self.clone();
        out.constant = out.constant.wrapping_add(other.constant.wrapping_mul(sign));
        for (v, c) in &other.terms {
            let slot = out.terms.entry(*v).or_insert(0);
            *slot = slot.wrapping_add(c.wrapping_mul(sign));
            if *slot == 0 {
                out.terms.remove(v);
            }
        }
        out
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.combine(other, -1)
    }

    pub fn scale(&self, k: i32) -> LinExpr {
        LinExpr {
            constant: self.constant.wrapping_mul(k),
            terms: self
                .terms
                .iter()
                .map(|(v, c)| (*v, c.wrapping_mul(k)))
                .filter(|(_, c)| *c != 0)
                .collect(),
        }
    }

    /// Concrete int32 value under `model`; missing variables read as 0.
    pub fn eval(&self, model: &[i32]) -> i32 {
        self.terms.iter().fold(self.constant, |acc, (v, c)| {
            let x = model.get(*v as usize).copied().unwrap_or(0);
            acc.wrapping_add(c.wrapping_mul(x))
        })
    }

    pub fn max_var(&self) -> Option<u32> {
        self.terms.keys().next_back().copied()
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if *c == 1 {
                write!(f, "x{v}")?;
            } else {
                write!(f, "{c}*x{v}")?;
            }
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant != 0 {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymValue {
    Linear(LinExpr),
    /// Result of a non-linear operation on symbolic operands.
    Opaque,
}

impl SymValue {
    pub fn concrete(v: i32) -> Self {
        SymValue::Linear(LinExpr::constant(v))
    }

    pub fn as_concrete(&self) -> Option<i32> {
        match self {
            SymValue::Linear(e) => e.as_constant(),
            SymValue::Opaque => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.as_concrete().is_none()
    }
}

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymValue::Linear(e) => e.fmt(f),
            SymValue::Opaque => f.write_str("<opaque>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub cmp: CmpOp,
    pub lhs: SymValue,
    pub rhs: SymValue,
}

impl Constraint {
    pub fn new(cmp: CmpOp, lhs: SymValue, rhs: SymValue) -> Self {
        Self { cmp, lhs, rhs }
    }

    pub fn negate(&self) -> Self {
        Self {
            cmp: self.cmp.negate(),
            lhs: self.lhs.clone(),
            rhs: self.rhs.clone(),
        }
    }

    pub fn is_opaque(&self) -> bool {
        matches!(self.lhs, SymValue::Opaque) || matches!(self.rhs, SymValue::Opaque)
    }

    /// `None` when an operand is opaque.
    pub fn eval(&self, model: &[i32]) -> Option<bool> {
        match (&self.lhs, &self.rhs) {
            (SymValue::Linear(l), SymValue::Linear(r)) => Some(self.cmp.eval(l.eval(model), r.eval(model))),
            _ => None,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.cmp.mnemonic(), self.rhs)
    }
}

/// Conjunction of branch constraints along one path, in path order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PathCondition {
    constraints: Vec<Constraint>,
}

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_constraints(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn with(&self, c: Constraint) -> Self {
        let mut out = self.clone();
        out.constraints.push(c);
        out
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// Same path condition without constraints that mention opaque values.
    pub fn linear_part(&self) -> Self {
        Self {
            constraints: self.constraints.iter().filter(|c| !c.is_opaque()).cloned().collect(),
        }
    }

    pub fn has_opaque(&self) -> bool {
        self.constraints.iter().any(Constraint::is_opaque)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_arithmetic_wraps() {
        let x = LinExpr::var(0);
        let e = x.scale(3).add(&LinExpr::constant(i32::MAX));
        assert_eq!(e.eval(&[1]), i32::MAX.wrapping_add(3));
        let zero = e.sub(&e);
        assert_eq!(zero, LinExpr::constant(0));
        assert_eq!(zero.as_constant(), Some(0));
        assert_eq!(x.scale(0).as_constant(), Some(0));
    }

    #[test]
    fn canonical_term_order() {
        let a = LinExpr::var(2).add(&LinExpr::var(0));
        let b = LinExpr::var(0).add(&LinExpr::var(2));
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "x0 + x2");
    }
}
