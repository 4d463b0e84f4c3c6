use munchkin_core::ir::CmpOp;
use munchkin_core::symex::{solve, Constraint, LinExpr, PathCondition, SolveResult, SymValue};
use proptest::prelude::*;

const BOX: i32 = 6;

fn lin(c0: i32, c1: i32, k: i32) -> SymValue {
    SymValue::Linear(
        LinExpr::var(0)
            .scale(c0)
            .add(&LinExpr::var(1).scale(c1))
            .add(&LinExpr::constant(k)),
    )
}

fn boxed(extra: &[(usize, i32, i32, i32)]) -> PathCondition {
    let x = |v| SymValue::Linear(LinExpr::var(v));
    let k = SymValue::concrete;
    let mut cs = vec![
        Constraint::new(CmpOp::Ge, x(0), k(-BOX)),
        Constraint::new(CmpOp::Le, x(0), k(BOX)),
        Constraint::new(CmpOp::Ge, x(1), k(-BOX)),
        Constraint::new(CmpOp::Le, x(1), k(BOX)),
    ];
    for &(cmp, c0, c1, kk) in extra {
        cs.push(Constraint::new(CmpOp::ALL[cmp], lin(c0, c1, kk), k(0)));
    }
    PathCondition::from_constraints(cs)
}

fn brute_force(pc: &PathCondition) -> Vec<[i32; 2]> {
    let mut out = Vec::new();
    for a in -BOX..=BOX {
        for b in -BOX..=BOX {
            if pc.constraints().iter().all(|c| c.eval(&[a, b]) == Some(true)) {
                out.push([a, b]);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    /// Within a small box the solver agrees exactly with enumeration, and
    /// a model is the one closest to zero in each variable's final domain.
    #[test]
    fn agrees_with_enumeration(extra in prop::collection::vec((0usize..6, -4i32..5, -4i32..5, -10i32..11), 0..4)) {
        let pc = boxed(&extra);
        let models = brute_force(&pc);
        match solve(&pc, 2) {
            SolveResult::Sat(m) => {
                prop_assert!(models.contains(&[m.get(0), m.get(1)]), "model {:?} not in oracle set", m);
            }
            SolveResult::Unsat => prop_assert!(models.is_empty(), "missed model {:?}", models.first()),
            SolveResult::Unknown => prop_assert!(false, "bounded linear query returned Unknown"),
        }
    }
}

#[test]
fn single_variable_prefers_zero() {
    let pc = boxed(&[]);
    assert_eq!(solve(&pc, 2), SolveResult::Sat(vec![0, 0].into()));
    // x0 >= 3
    let pc = boxed(&[(4, 1, 0, -3)]);
    assert_eq!(solve(&pc, 2), SolveResult::Sat(vec![3, 0].into()));
}
