//! Interval-propagation solver for linear int32 path conditions.
//!
//! Each query propagates bounds over the constraints whose operands cannot
//! overflow on the current domains (where wrap-around and mathematical
//! semantics coincide), then splits domains around the value closest to
//! zero. Every candidate model is checked by evaluating all constraints with
//! wrap-around semantics. The search visits at most [`ENUMERATION_CAP`] boxes;
//! running out yields `Unknown`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Constraint, LinExpr, PathCondition, SymValue};
use crate::ir::{CmpOp, InputVector};

pub const ENUMERATION_CAP: u64 = 1 << 16;
const MAX_PROPAGATION_ROUNDS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(InputVector),
    Unsat,
    Unknown,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    /// Sat or Unknown: the path may be feasible.
    pub fn maybe_feasible(&self) -> bool {
        !matches!(self, SolveResult::Unsat)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub cache_hits: u64,
}

impl SolverStats {
    pub fn since(&self, earlier: &SolverStats) -> SolverStats {
        SolverStats {
            queries: self.queries - earlier.queries,
            sat: self.sat - earlier.sat,
            unsat: self.unsat - earlier.unsat,
            unknown: self.unknown - earlier.unknown,
            cache_hits: self.cache_hits - earlier.cache_hits,
        }
    }

    pub fn add(&self, other: &SolverStats) -> SolverStats {
        SolverStats {
            queries: self.queries + other.queries,
            sat: self.sat + other.sat,
            unsat: self.unsat + other.unsat,
            unknown: self.unknown + other.unknown,
            cache_hits: self.cache_hits + other.cache_hits,
        }
    }
}

/// Query-counting solver front end with a cache keyed by path condition.
#[derive(Debug, Default)]
pub struct Solver {
    cache: HashMap<PathCondition, SolveResult>,
    stats: SolverStats,
}

impl Solver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Checks `pc`. Counts one query unless the answer is cached. Sat models
    /// have exactly `num_vars` entries.
    pub fn solve(&mut self, pc: &PathCondition, num_vars: usize) -> SolveResult {
        let result = if let Some(hit) = self.cache.get(pc) {
            self.stats.cache_hits += 1;
            hit.clone()
        } else {
            let result = solve(pc, required_vars(pc));
            self.stats.queries += 1;
            match result {
                SolveResult::Sat(_) => self.stats.sat += 1,
                SolveResult::Unsat => self.stats.unsat += 1,
                SolveResult::Unknown => self.stats.unknown += 1,
            }
            self.cache.insert(pc.clone(), result.clone());
            result
        };
        match result {
            SolveResult::Sat(model) => {
                let mut values = model.0;
                values.resize(num_vars.max(values.len()), 0);
                SolveResult::Sat(InputVector(values))
            }
            other => other,
        }
    }

    pub fn is_cached(&self, pc: &PathCondition) -> bool {
        self.cache.contains_key(pc)
    }
}

fn required_vars(pc: &PathCondition) -> usize {
    pc.constraints()
        .iter()
        .flat_map(|c| [&c.lhs, &c.rhs])
        .filter_map(|v| match v {
            SymValue::Linear(e) => e.max_var(),
            SymValue::Opaque => None,
        })
        .max()
        .map_or(0, |m| m as usize + 1)
}

type Domain = (i64, i64);

const FULL: Domain = (i32::MIN as i64, i32::MAX as i64);

/// `sum(coeffs) + constant` over mathematical integers.
#[derive(Clone, Debug)]
struct MathExpr {
    constant: i128,
    terms: Vec<(usize, i128)>,
}

impl MathExpr {
    fn from_lin(e: &LinExpr) -> Self {
        Self {
            constant: i128::from(e.constant_term()),
            terms: e.terms().map(|(v, c)| (v as usize, i128::from(c))).collect(),
        }
    }

    fn range(&self, doms: &[Domain]) -> (i128, i128) {
        self.terms
            .iter()
            .fold((self.constant, self.constant), |(lo, hi), &(v, c)| {
                let (a, b) = (i128::from(doms[v].0) * c, i128::from(doms[v].1) * c);
                (lo + a.min(b), hi + a.max(b))
            })
    }

    fn sub(&self, other: &MathExpr) -> MathExpr {
        let mut terms: HashMap<usize, i128> = self.terms.iter().copied().collect();
        for &(v, c) in &other.terms {
            *terms.entry(v).or_insert(0) -= c;
        }
        let mut terms: Vec<_> = terms.into_iter().filter(|(_, c)| *c != 0).collect();
        terms.sort_unstable();
        MathExpr {
            constant: self.constant - other.constant,
            terms,
        }
    }

    fn plus(&self, k: i128) -> MathExpr {
        MathExpr {
            constant: self.constant + k,
            terms: self.terms.clone(),
        }
    }
}

fn fits_i32((lo, hi): (i128, i128)) -> bool {
    lo >= i128::from(i32::MIN) && hi <= i128::from(i32::MAX)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

enum Prop {
    Changed,
    Stable,
    Empty,
}

/// Tightens `doms` so that `e <= 0` can still hold.
fn propagate_le(e: &MathExpr, doms: &mut [Domain]) -> Prop {
    let (lo, _) = e.range(doms);
    if lo > 0 {
        return Prop::Empty;
    }
    let mut changed = false;
    for &(j, a) in &e.terms {
        let (dlo, dhi) = doms[j];
        let own = (i128::from(dlo) * a).min(i128::from(dhi) * a);
        let rest_min = lo - own;
        // a * x_j <= -rest_min
        let bound = -rest_min;
        let (mut nlo, mut nhi) = (i128::from(dlo), i128::from(dhi));
        if a > 0 {
            nhi = nhi.min(floor_div(bound, a));
        } else {
            nlo = nlo.max(ceil_div(bound, a));
        }
        if nlo > nhi {
            return Prop::Empty;
        }
        let nd = (nlo as i64, nhi as i64);
        if nd != doms[j] {
            doms[j] = nd;
            changed = true;
        }
    }
    if changed {
        Prop::Changed
    } else {
        Prop::Stable
    }
}

/// `e != 0`: only bounds can be trimmed.
fn propagate_ne(e: &MathExpr, doms: &mut [Domain]) -> Prop {
    let open: Vec<_> = e.terms.iter().filter(|(v, _)| doms[*v].0 != doms[*v].1).collect();
    match open.as_slice() {
        [] => {
            if e.range(doms).0 == 0 {
                Prop::Empty
            } else {
                Prop::Stable
            }
        }
        [&(j, a)] => {
            let fixed: i128 = e.constant
                + e.terms
                    .iter()
                    .filter(|(v, _)| *v != j)
                    .map(|&(v, c)| c * i128::from(doms[v].0))
                    .sum::<i128>();
            if fixed % a != 0 {
                return Prop::Stable;
            }
            let excluded = -fixed / a;
            let (lo, hi) = (i128::from(doms[j].0), i128::from(doms[j].1));
            if excluded == lo {
                doms[j].0 += 1;
                Prop::Changed
            } else if excluded == hi {
                doms[j].1 -= 1;
                Prop::Changed
            } else {
                Prop::Stable
            }
        }
        _ => Prop::Stable,
    }
}

struct LinConstraint {
    cmp: CmpOp,
    lhs: MathExpr,
    rhs: MathExpr,
    source: Constraint,
}

fn propagate(cs: &[LinConstraint], doms: &mut [Domain]) -> bool {
    for _ in 0..MAX_PROPAGATION_ROUNDS {
        let mut changed = false;
        for c in cs {
            // Wrap-around and mathematical comparison agree only when neither
            // side can overflow on the current domains.
            if !fits_i32(c.lhs.range(doms)) || !fits_i32(c.rhs.range(doms)) {
                continue;
            }
            let d = c.lhs.sub(&c.rhs);
            let parts: Vec<(MathExpr, bool)> = match c.cmp {
                CmpOp::Lt => vec![(d.plus(1), false)],
                CmpOp::Le => vec![(d, false)],
                CmpOp::Gt => vec![(c.rhs.sub(&c.lhs).plus(1), false)],
                CmpOp::Ge => vec![(c.rhs.sub(&c.lhs), false)],
                CmpOp::Eq => vec![(c.rhs.sub(&c.lhs), false), (d, false)],
                CmpOp::Ne => vec![(d, true)],
            };
            for (e, is_ne) in parts {
                let r = if is_ne {
                    propagate_ne(&e, doms)
                } else {
                    propagate_le(&e, doms)
                };
                match r {
                    Prop::Empty => return false,
                    Prop::Changed => changed = true,
                    Prop::Stable => {}
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

fn closest_to_zero((lo, hi): Domain) -> i64 {
    0i64.clamp(lo, hi)
}

enum Search {
    Found(Vec<i32>),
    Exhausted,
    CapHit,
}

/// Depth-first split search, trying values closest to zero first.
fn search(cs: &[LinConstraint], involved: &[bool], doms: Vec<Domain>) -> Search {
    let mut budget = ENUMERATION_CAP;
    let mut stack = vec![doms];
    while let Some(mut doms) = stack.pop() {
        if budget == 0 {
            return Search::CapHit;
        }
        budget -= 1;
        if !propagate(cs, &mut doms) {
            continue;
        }
        let open = (0..doms.len())
            .filter(|&v| involved[v] && doms[v].0 != doms[v].1)
            .min_by_key(|&v| (doms[v].1 - doms[v].0, v));
        let Some(v) = open else {
            let model: Vec<i32> = doms.iter().map(|&d| closest_to_zero(d) as i32).collect();
            if cs.iter().all(|c| c.source.eval(&model) == Some(true)) {
                return Search::Found(model);
            }
            continue;
        };
        let (lo, hi) = doms[v];
        let pick = closest_to_zero((lo, hi));
        // Pushed in reverse of the order they are explored.
        if pick > lo {
            let mut sub = doms.clone();
            sub[v] = (lo, pick - 1);
            stack.push(sub);
        }
        if pick < hi {
            let mut sub = doms.clone();
            sub[v] = (pick + 1, hi);
            stack.push(sub);
        }
        doms[v] = (pick, pick);
        stack.push(doms);
    }
    Search::Exhausted
}

/// Uncounted, uncached satisfiability check of `pc` over `num_vars` inputs.
///
/// `Unsat` is only reported when the linear constraints admit no model; a
/// condition with opaque operands is at best `Unknown`.
pub fn solve(pc: &PathCondition, num_vars: usize) -> SolveResult {
    let needed = required_vars(pc);
    if needed > num_vars {
        return SolveResult::Unknown;
    }
    let mut has_opaque = false;
    let mut cs = Vec::new();
    let mut involved = vec![false; num_vars];
    for c in pc.constraints() {
        match (&c.lhs, &c.rhs) {
            (SymValue::Linear(l), SymValue::Linear(r)) => {
                for (v, _) in l.terms().chain(r.terms()) {
                    involved[v as usize] = true;
                }
                cs.push(LinConstraint {
                    cmp: c.cmp,
                    lhs: MathExpr::from_lin(l),
                    rhs: MathExpr::from_lin(r),
                    source: c.clone(),
                });
            }
            _ => has_opaque = true,
        }
    }
    match search(&cs, &involved, vec![FULL; num_vars]) {
        Search::Found(_) if has_opaque => SolveResult::Unknown,
        Search::Found(model) => SolveResult::Sat(InputVector(model)),
        Search::Exhausted => SolveResult::Unsat,
        Search::CapHit => SolveResult::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> SymValue {
        SymValue::Linear(LinExpr::var(i))
    }

    fn k(v: i32) -> SymValue {
        SymValue::concrete(v)
    }

    fn pc(cs: Vec<Constraint>) -> PathCondition {
        PathCondition::from_constraints(cs)
    }

    /// Brute-force oracle over a small window of candidate values.
    fn brute_force(pc: &PathCondition, window: std::ops::RangeInclusive<i32>) -> Vec<i32> {
        window
            .filter(|v| pc.constraints().iter().all(|c| c.eval(&[*v]) == Some(true)))
            .collect()
    }

    #[test]
    fn empty_condition_is_sat_at_zero() {
        assert_eq!(solve(&PathCondition::new(), 1), SolveResult::Sat(InputVector(vec![0])));
    }

    #[test]
    fn interval_intersection() {
        let p = pc(vec![
            Constraint::new(CmpOp::Ge, x(0), k(0)),
            Constraint::new(CmpOp::Le, x(0), k(7)),
            Constraint::new(CmpOp::Ge, x(0), k(4)),
            Constraint::new(CmpOp::Le, x(0), k(5)),
        ]);
        let allowed = brute_force(&p, 0..=7);
        assert_eq!(allowed, vec![4, 5]);
        match solve(&p, 1) {
            SolveResult::Sat(m) => assert!(allowed.contains(&m.get(0))),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn empty_interval_is_unsat() {
        let p = pc(vec![
            Constraint::new(CmpOp::Lt, x(0), k(0)),
            Constraint::new(CmpOp::Gt, x(0), k(0)),
        ]);
        assert_eq!(solve(&p, 1), SolveResult::Unsat);
    }

    #[test]
    fn disequality_trims_bounds() {
        let p = pc(vec![
            Constraint::new(CmpOp::Ge, x(0), k(3)),
            Constraint::new(CmpOp::Le, x(0), k(4)),
            Constraint::new(CmpOp::Ne, x(0), k(3)),
        ]);
        assert_eq!(solve(&p, 1), SolveResult::Sat(InputVector(vec![4])));
        let q = p.with(Constraint::new(CmpOp::Ne, x(0), k(4)));
        assert_eq!(solve(&q, 1), SolveResult::Unsat);
    }

    #[test]
    fn two_variable_system() {
        // x0 + x1 == 10, x0 - x1 == 4  =>  x0 = 7, x1 = 3
        let sum = SymValue::Linear(LinExpr::var(0).add(&LinExpr::var(1)));
        let diff = SymValue::Linear(LinExpr::var(0).sub(&LinExpr::var(1)));
        let p = pc(vec![
            Constraint::new(CmpOp::Ge, x(0), k(-100)),
            Constraint::new(CmpOp::Le, x(0), k(100)),
            Constraint::new(CmpOp::Ge, x(1), k(-100)),
            Constraint::new(CmpOp::Le, x(1), k(100)),
            Constraint::new(CmpOp::Eq, sum, k(10)),
            Constraint::new(CmpOp::Eq, diff, k(4)),
        ]);
        assert_eq!(solve(&p, 2), SolveResult::Sat(InputVector(vec![7, 3])));
    }

    #[test]
    fn overflow_is_respected() {
        // x + 1 < x holds only for x = i32::MAX under wrap-around.
        let plus_one = SymValue::Linear(LinExpr::var(0).add(&LinExpr::constant(1)));
        let p = pc(vec![Constraint::new(CmpOp::Lt, plus_one, x(0))]);
        assert_eq!(solve(&p, 1), SolveResult::Unknown);
        let narrowed = p.with(Constraint::new(CmpOp::Gt, x(0), k(i32::MAX - 3)));
        assert_eq!(solve(&narrowed, 1), SolveResult::Sat(InputVector(vec![i32::MAX])));
    }

    #[test]
    fn scaled_variable() {
        // 3x == 12 with x in [0, 10]
        let three_x = SymValue::Linear(LinExpr::var(0).scale(3));
        let p = pc(vec![
            Constraint::new(CmpOp::Ge, x(0), k(0)),
            Constraint::new(CmpOp::Le, x(0), k(10)),
            Constraint::new(CmpOp::Eq, three_x.clone(), k(12)),
        ]);
        assert_eq!(solve(&p, 1), SolveResult::Sat(InputVector(vec![4])));
        let q = pc(vec![
            Constraint::new(CmpOp::Ge, x(0), k(0)),
            Constraint::new(CmpOp::Le, x(0), k(10)),
            Constraint::new(CmpOp::Eq, three_x, k(13)),
        ]);
        assert_eq!(solve(&q, 1), SolveResult::Unsat);
    }

    #[test]
    fn opaque_blocks_sat_but_not_unsat() {
        let p = pc(vec![Constraint::new(CmpOp::Lt, SymValue::Opaque, k(3))]);
        assert_eq!(solve(&p, 1), SolveResult::Unknown);
        let q = p
            .with(Constraint::new(CmpOp::Lt, x(0), k(0)))
            .with(Constraint::new(CmpOp::Gt, x(0), k(0)));
        assert_eq!(solve(&q, 1), SolveResult::Unsat);
    }

    #[test]
    fn cache_hits_are_not_queries() {
        let mut s = Solver::new();
        let p = pc(vec![Constraint::new(CmpOp::Gt, x(0), k(5))]);
        assert_eq!(s.solve(&p, 1), SolveResult::Sat(InputVector(vec![6])));
        assert_eq!(s.solve(&p, 3), SolveResult::Sat(InputVector(vec![6, 0, 0])));
        let st = s.stats();
        assert_eq!((st.queries, st.sat, st.cache_hits), (1, 1, 1));
        assert_eq!(st.queries, st.sat + st.unsat + st.unknown);
    }

    #[test]
    fn helper_division_rounding() {
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, 2), 4);
    }
}
