//! Concrete interpreter with function and edge coverage instrumentation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::ir::{Block, Function, FunctionName, InputVector, Instruction, Operand, Program, Terminator};

pub const MAP_SIZE: usize = 1 << 16;
const MAP_WORDS: usize = MAP_SIZE / 64;
pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// 32-bit FNV-1a over `function`, a zero byte, then `block`.
pub fn location_hash(function: &str, block: &str) -> u32 {
    const OFFSET: u32 = 0x811c_9dc5;
    const PRIME: u32 = 0x0100_0193;
    let mut h = OFFSET;
    for b in function.bytes().chain(std::iter::once(0u8)).chain(block.bytes()) {
        h ^= u32::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Bitmap slot for a transition between two locations: AFL's shift-xor,
/// masked to 16 bits. The first transition of a run uses 0 as `prev`.
pub fn edge_index(prev: u32, cur: u32) -> usize {
    (((prev >> 1) ^ cur) & 0xffff) as usize
}

/// Covered functions plus a 64Ki-bit edge bitmap.
#[derive(Clone, PartialEq, Eq)]
pub struct CoverageMap {
    functions: BTreeSet<FunctionName>,
    edge_bits: Box<[u64; MAP_WORDS]>,
    edge_count: usize,
}

impl Default for CoverageMap {
    fn default() -> Self {
        Self {
            functions: BTreeSet::new(),
            edge_bits: Box::new([0; MAP_WORDS]),
            edge_count: 0,
        }
    }
}

impl fmt::Debug for CoverageMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoverageMap")
            .field("functions", &self.functions)
            .field("edge_count", &self.edge_count)
            .finish()
    }
}

impl Serialize for CoverageMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CoverageMap", 2)?;
        s.serialize_field("functions", &self.functions)?;
        s.serialize_field("edge_count", &self.edge_count)?;
        s.end()
    }
}

/// Deserialized maps carry functions and the edge count only.
impl<'de> Deserialize<'de> for CoverageMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            functions: BTreeSet<FunctionName>,
            #[serde(default)]
            edge_count: usize,
        }
        let raw = Raw::deserialize(deserializer)?;
        Ok(Self {
            functions: raw.functions,
            edge_bits: Box::new([0; MAP_WORDS]),
            edge_count: raw.edge_count,
        })
    }
}

impl CoverageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_functions<I, S>(functions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            functions: functions.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn functions(&self) -> &BTreeSet<FunctionName> {
        &self.functions
    }

    pub fn covers(&self, function: &str) -> bool {
        self.functions.contains(function)
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, index: usize) -> bool {
        self.edge_bits[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn insert_function(&mut self, name: &str) {
        if !self.functions.contains(name) {
            self.functions.insert(name.to_string());
        }
    }

    /// Sets the bit; returns `true` if it was previously clear.
    pub fn insert_edge(&mut self, index: usize) -> bool {
        let word = &mut self.edge_bits[index / 64];
        let mask = 1u64 << (index % 64);
        let fresh = *word & mask == 0;
        if fresh {
            *word |= mask;
            self.edge_count += 1;
        }
        fresh
    }

    /// Number of bits set in `other` but not in `self`.
    pub fn new_edges_in(&self, other: &CoverageMap) -> usize {
        self.edge_bits
            .iter()
            .zip(other.edge_bits.iter())
            .map(|(a, b)| (b & !a).count_ones() as usize)
            .sum()
    }

    /// In-place union.
    pub fn merge_from(&mut self, other: &CoverageMap) {
        for f in &other.functions {
            self.insert_function(f);
        }
        for (a, b) in self.edge_bits.iter_mut().zip(other.edge_bits.iter()) {
            *a |= *b;
        }
        self.edge_count = self.edge_bits.iter().map(|w| w.count_ones() as usize).sum();
    }
}

/// Union of two coverage maps. Commutative, associative and idempotent.
pub fn merge_coverage(a: &CoverageMap, b: &CoverageMap) -> CoverageMap {
    let mut out = a.clone();
    out.merge_from(b);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    ArithmeticFault,
    StepLimitExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub coverage: CoverageMap,
    pub outcome: Outcome,
    pub printed: Vec<i32>,
    pub steps: u64,
}

struct Frame<'p> {
    function: &'p Function,
    block: &'p Block,
    index: usize,
    locals: HashMap<&'p str, i32>,
    ret_dest: Option<&'p str>,
}

impl<'p> Frame<'p> {
    fn value(&self, op: &Operand) -> i32 {
        match op {
            Operand::Const(v) => *v,
            Operand::Local(name) => *self
                .locals
                .get(name.as_str())
                .expect("validated: locals are defined before use"),
        }
    }
}

/// Executes `p` from `main` on `input`. Reads past the end of `input`
/// yield 0.
pub fn run_concrete(p: &Program, input: &InputVector, step_limit: u64) -> RunResult {
    let mut coverage = CoverageMap::new();
    let mut printed = Vec::new();
    let mut steps = 0u64;
    let mut next_input = 0usize;

    let main = p.entry();
    coverage.insert_function(&main.name);
    let mut prev_loc = 0u32;
    let enter = |cov: &mut CoverageMap, prev: &mut u32, f: &str, b: &str| {
        let cur = location_hash(f, b);
        cov.insert_edge(edge_index(*prev, cur));
        *prev = cur;
    };
    enter(&mut coverage, &mut prev_loc, &main.name, main.entry_block.as_str());

    let mut stack = vec![Frame {
        function: main,
        block: main.entry(),
        index: 0,
        locals: HashMap::new(),
        ret_dest: None,
    }];

    let outcome = 'run: loop {
        if steps >= step_limit {
            break Outcome::StepLimitExceeded;
        }
        steps += 1;
        let frame = stack.last_mut().expect("non-empty call stack");
        let block = frame.block;

        if let Some(inst) = block.instructions.get(frame.index) {
            frame.index += 1;
            match inst {
                Instruction::Const { dest, value } => {
                    frame.locals.insert(dest, *value);
                }
                Instruction::ReadInput { dest } => {
                    let v = input.get(next_input);
                    next_input += 1;
                    frame.locals.insert(dest, v);
                }
                Instruction::BinOp { dest, op, lhs, rhs } => match op.eval(frame.value(lhs), frame.value(rhs)) {
                    Ok(v) => {
                        frame.locals.insert(dest, v);
                    }
                    Err(_) => break 'run Outcome::ArithmeticFault,
                },
                Instruction::Print { value } => printed.push(frame.value(value)),
                Instruction::Call { dest, callee, args } => {
                    let target = p.function(callee).expect("validated: callee exists");
                    let locals = target
                        .params
                        .iter()
                        .map(String::as_str)
                        .zip(args.iter().map(|a| frame.value(a)))
                        .collect();
                    coverage.insert_function(&target.name);
                    enter(&mut coverage, &mut prev_loc, &target.name, target.entry_block.as_str());
                    stack.push(Frame {
                        function: target,
                        block: target.entry(),
                        index: 0,
                        locals,
                        ret_dest: dest.as_deref(),
                    });
                }
            }
            continue;
        }

        let next = match &block.terminator {
            Terminator::Branch {
                cmp,
                lhs,
                rhs,
                then_block,
                else_block,
            } => {
                if cmp.eval(frame.value(lhs), frame.value(rhs)) {
                    then_block
                } else {
                    else_block
                }
            }
            Terminator::Jump(target) => target,
            Terminator::Return(value) => {
                let ret = value.as_ref().map(|v| frame.value(v)).unwrap_or(0);
                let done = stack.pop().expect("frame");
                let Some(caller) = stack.last_mut() else {
                    break 'run Outcome::Completed;
                };
                if let Some(dest) = done.ret_dest {
                    caller.locals.insert(dest, ret);
                }
                enter(
                    &mut coverage,
                    &mut prev_loc,
                    &caller.function.name,
                    caller.block.id.as_str(),
                );
                continue;
            }
        };
        frame.block = frame.function.block(next).expect("validated: branch target exists");
        frame.index = 0;
        enter(&mut coverage, &mut prev_loc, &frame.function.name, next.as_str());
    };

    RunResult {
        coverage,
        outcome,
        printed,
        steps,
    }
}
