//! Artificial range-dispatch programs.
//!
//! `main` reads one integer, rejects anything outside `[0, b^d - 1]`, and
//! otherwise calls the root of a complete `b`-ary tree of range handlers.
//! Every internal handler splits its range into `b` contiguous parts and
//! calls the child owning the input; leaves own a single value and print it.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ir::{
    Block, BlockId, CmpOp, Function, FunctionName, Instruction, Operand, Program, Terminator, ENTRY_FUNCTION,
};

pub const MIN_BRANCHING: u32 = 2;
pub const MAX_BRANCHING: u32 = 16;
pub const MIN_DEPTH: u32 = 1;
pub const MAX_DEPTH: u32 = 12;
pub const MAX_FUNCTIONS: u64 = 1_000_000;
/// Largest input range for which [`ground_truth_coverage`] enumerates inputs.
pub const MAX_ORACLE_RANGE: u64 = 1 << 16;

/// Value printed by `main` when the input is out of range.
pub const INVALID_MARKER: i32 = -1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("branching factor {0} outside [{MIN_BRANCHING}, {MAX_BRANCHING}]")]
    Branching(u32),
    #[error("depth {0} outside [{MIN_DEPTH}, {MAX_DEPTH}]")]
    Depth(u32),
    #[error("b={b}, d={d} would generate {count} functions (limit {MAX_FUNCTIONS})")]
    TooManyFunctions { b: u32, d: u32, count: u64 },
    #[error("input range of {0} values is too large to enumerate (limit {MAX_ORACLE_RANGE})")]
    RangeTooLarge(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub branching: u32,
    pub depth: u32,
    /// Salt for function names; 0 keeps the plain `node_<lo>_<hi>` names.
    pub seed: u64,
}

impl GenParams {
    pub fn new(branching: u32, depth: u32) -> Self {
        Self {
            branching,
            depth,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if !(MIN_BRANCHING..=MAX_BRANCHING).contains(&self.branching) {
            return Err(GenError::Branching(self.branching));
        }
        if !(MIN_DEPTH..=MAX_DEPTH).contains(&self.depth) {
            return Err(GenError::Depth(self.depth));
        }
        let count = expected_function_count(self.branching, self.depth);
        if count > MAX_FUNCTIONS {
            return Err(GenError::TooManyFunctions {
                b: self.branching,
                d: self.depth,
                count,
            });
        }
        Ok(())
    }

    /// Number of valid inputs, `b^d`.
    pub fn range_size(&self) -> u64 {
        u64::from(self.branching).saturating_pow(self.depth)
    }

    pub fn max_input(&self) -> i64 {
        self.range_size() as i64 - 1
    }

    fn salt(&self) -> Option<String> {
        (self.seed != 0).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            format!("{:04x}", rng.gen::<u16>())
        })
    }

    pub fn node_name(&self, lo: i64, hi: i64) -> FunctionName {
        let base = if lo == hi {
            format!("leaf_{lo}")
        } else {
            format!("node_{lo}_{hi}")
        };
        match self.salt() {
            Some(s) => format!("{base}_{s}"),
            None => base,
        }
    }
}

/// `1 + sum_{i=0}^{d} b^i`: `main` plus a complete `b`-ary tree with `d + 1`
/// levels.
pub fn expected_function_count(b: u32, d: u32) -> u64 {
    let b = u64::from(b);
    let mut total = 1u64;
    let mut level = 1u64;
    for _ in 0..=d {
        total = total.saturating_add(level);
        level = level.saturating_mul(b);
    }
    total
}

/// Splits `[lo, hi]` into `parts` contiguous subranges; earlier parts take
/// the extra element when the size is not divisible.
pub fn split_range(lo: i64, hi: i64, parts: u32) -> Vec<(i64, i64)> {
    let size = hi - lo + 1;
    let parts = i64::from(parts).min(size).max(1);
    let q = size / parts;
    let r = size % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut start = lo;
    for i in 0..parts {
        let len = q + i64::from(i < r);
        out.push((start, start + len - 1));
        start += len;
    }
    out
}

fn lit(v: i64) -> Operand {
    Operand::Const(i32::try_from(v).expect("generator ranges fit in int32"))
}

fn call_block(id: String, callee: FunctionName, arg: &str) -> Block {
    Block::new(
        id,
        vec![Instruction::Call {
            dest: None,
            callee,
            args: vec![Operand::local(arg)],
        }],
        Terminator::Return(None),
    )
}

fn handler(params: &GenParams, lo: i64, hi: i64, out: &mut Vec<Function>) {
    let name = params.node_name(lo, hi);
    if lo == hi {
        out.push(Function::new(
            name,
            vec!["v".into()],
            vec![Block::new(
                "entry",
                vec![Instruction::Print {
                    value: Operand::local("v"),
                }],
                Terminator::Return(None),
            )],
        ));
        return;
    }

    let children = split_range(lo, hi, params.branching);
    let mut blocks = Vec::new();
    // Chain of `v < upper_i` tests; the final child is the fall-through.
    for (i, &(_, child_hi)) in children.iter().enumerate().take(children.len() - 1) {
        let test_id = if i == 0 {
            "entry".to_string()
        } else {
            format!("test_{i}")
        };
        let else_id = if i + 2 == children.len() {
            format!("call_{}", i + 1)
        } else {
            format!("test_{}", i + 1)
        };
        blocks.push(Block::new(
            test_id,
            vec![],
            Terminator::Branch {
                cmp: CmpOp::Lt,
                lhs: Operand::local("v"),
                rhs: lit(child_hi + 1),
                then_block: BlockId(format!("call_{i}")),
                else_block: BlockId(else_id),
            },
        ));
    }
    for (i, &(clo, chi)) in children.iter().enumerate() {
        blocks.push(call_block(format!("call_{i}"), params.node_name(clo, chi), "v"));
    }
    out.push(Function::new(name, vec!["v".into()], blocks));

    for (clo, chi) in children {
        handler(params, clo, chi, out);
    }
}

/// Builds the artificial program for `params`.
pub fn generate_program(params: &GenParams) -> Result<Program, GenError> {
    params.validate()?;
    let max = params.max_input();
    let root = params.node_name(0, max);

    let main = Function::new(
        ENTRY_FUNCTION,
        vec![],
        vec![
            Block::new(
                "entry",
                vec![Instruction::ReadInput { dest: "x".into() }],
                Terminator::Branch {
                    cmp: CmpOp::Lt,
                    lhs: Operand::local("x"),
                    rhs: Operand::Const(0),
                    then_block: "invalid".into(),
                    else_block: "check_upper".into(),
                },
            ),
            Block::new(
                "check_upper",
                vec![],
                Terminator::Branch {
                    cmp: CmpOp::Gt,
                    lhs: Operand::local("x"),
                    rhs: lit(max),
                    then_block: "invalid".into(),
                    else_block: "dispatch".into(),
                },
            ),
            call_block("dispatch".into(), root, "x"),
            Block::new(
                "invalid",
                vec![Instruction::Print {
                    value: Operand::Const(INVALID_MARKER),
                }],
                Terminator::Return(None),
            ),
        ],
    );

    let mut functions = vec![main];
    if max == 0 {
        // Unreachable with validated params (b, d >= 1), kept total anyway.
        handler(params, 0, 0, &mut functions);
    } else {
        handler(params, 0, max, &mut functions);
    }
    let name = format!("artificial_b{}_d{}", params.branching, params.depth);
    Ok(Program::new(name, functions).expect("generator emits valid programs"))
}

/// Functions executed for input `v`, computed from the range arithmetic alone.
pub fn ground_truth_for(params: &GenParams, v: i64) -> BTreeSet<FunctionName> {
    let mut set = BTreeSet::from([ENTRY_FUNCTION.to_string()]);
    let max = params.max_input();
    if v < 0 || v > max {
        return set;
    }
    let (mut lo, mut hi) = (0, max);
    loop {
        set.insert(params.node_name(lo, hi));
        if lo == hi {
            break;
        }
        let (clo, chi) = split_range(lo, hi, params.branching)
            .into_iter()
            .find(|&(a, b)| a <= v && v <= b)
            .expect("children cover the parent range");
        lo = clo;
        hi = chi;
    }
    set
}

/// Exact executed-function sets for every valid input.
pub fn ground_truth_coverage(params: &GenParams) -> Result<BTreeMap<i64, BTreeSet<FunctionName>>, GenError> {
    params.validate()?;
    let size = params.range_size();
    if size > MAX_ORACLE_RANGE {
        return Err(GenError::RangeTooLarge(size));
    }
    Ok((0..size as i64).map(|v| (v, ground_truth_for(params, v))).collect())
}

/// The parameter grid of the original twelve artificial programs, in
/// program-id order (P1..P12).
pub const TABLE1_GRID: [(u32, u32); 12] = [
    (2, 1),
    (2, 2),
    (2, 3),
    (2, 4),
    (3, 1),
    (3, 2),
    (3, 3),
    (3, 4),
    (4, 1),
    (4, 2),
    (4, 3),
    (4, 4),
];
