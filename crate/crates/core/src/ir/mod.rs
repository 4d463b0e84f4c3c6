//! The mini imperative IR: functions made of basic blocks over 32-bit
//! integer locals.
//!
//! A [`Program`] can only be obtained through [`Program::new`] (or the text
//! parser, which calls it), so every `Program` value in circulation has
//! passed validation.

mod text;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use text::{parse_program, serialize_program};

pub type FunctionName = String;

/// Name of the function every program starts in.
pub const ENTRY_FUNCTION: &str = "main";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub String);

impl BlockId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlockId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Const(i32),
    Local(String),
}

impl Operand {
    pub fn local(name: impl Into<String>) -> Self {
        Operand::Local(name.into())
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Const(v) => write!(f, "{v}"),
            Operand::Local(name) => f.write_str(name),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

/// Division or remainder by zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArithmeticFault;

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    /// Two's-complement wrap-around arithmetic. Division truncates toward
    /// zero and the remainder takes the sign of the dividend.
    pub fn eval(self, lhs: i32, rhs: i32) -> Result<i32, ArithmeticFault> {
        Ok(match self {
            BinOp::Add => lhs.wrapping_add(rhs),
            BinOp::Sub => lhs.wrapping_sub(rhs),
            BinOp::Mul => lhs.wrapping_mul(rhs),
            BinOp::Div => {
                if rhs == 0 {
                    return Err(ArithmeticFault);
                }
                lhs.wrapping_div(rhs)
            }
            BinOp::Mod => {
                if rhs == 0 {
                    return Err(ArithmeticFault);
                }
                lhs.wrapping_rem(rhs)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt];

    pub fn mnemonic(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Ge => "ge",
            CmpOp::Gt => "gt",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub fn eval(self, lhs: i32, rhs: i32) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negate(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    Const {
        dest: String,
        value: i32,
    },
    ReadInput {
        dest: String,
    },
    BinOp {
        dest: String,
        op: BinOp,
        lhs: Operand,
        rhs: Operand,
    },
    Call {
        dest: Option<String>,
        callee: FunctionName,
        args: Vec<Operand>,
    },
    Print {
        value: Operand,
    },
}

impl Instruction {
    pub fn dest(&self) -> Option<&str> {
        match self {
            Instruction::Const { dest, .. } | Instruction::ReadInput { dest } | Instruction::BinOp { dest, .. } => {
                Some(dest)
            }
            Instruction::Call { dest, .. } => dest.as_deref(),
            Instruction::Print { .. } => None,
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Instruction::Const { .. } | Instruction::ReadInput { .. } => Vec::new(),
            Instruction::BinOp { lhs, rhs, .. } => vec![lhs, rhs],
            Instruction::Call { args, .. } => args.iter().collect(),
            Instruction::Print { value } => vec![value],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Branch {
        cmp: CmpOp,
        lhs: Operand,
        rhs: Operand,
        then_block: BlockId,
        else_block: BlockId,
    },
    Jump(BlockId),
    Return(Option<Operand>),
}

impl Terminator {
    pub fn successors(&self) -> Vec<&BlockId> {
        match self {
            Terminator::Branch {
                then_block, else_block, ..
            } => vec![then_block, else_block],
            Terminator::Jump(target) => vec![target],
            Terminator::Return(_) => Vec::new(),
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Terminator::Branch { lhs, rhs, .. } => vec![lhs, rhs],
            Terminator::Jump(_) => Vec::new(),
            Terminator::Return(value) => value.iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub instructions: Vec<Instruction>,
    pub terminator: Terminator,
}

impl Block {
    pub fn new(id: impl Into<BlockId>, instructions: Vec<Instruction>, terminator: Terminator) -> Self {
        Self {
            id: id.into(),
            instructions,
            terminator,
        }
    }
}

impl From<String> for BlockId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: FunctionName,
    pub params: Vec<String>,
    pub blocks: BTreeMap<BlockId, Block>,
    pub entry_block: BlockId,
}

impl Function {
    /// Builds a function whose entry is the first block in `blocks`.
    ///
    /// Panics if `blocks` is empty.
    pub fn new(name: impl Into<String>, params: Vec<String>, blocks: Vec<Block>) -> Self {
        let entry_block = blocks.first().expect("function needs at least one block").id.clone();
        Self {
            name: name.into(),
            params,
            entry_block,
            blocks: blocks.into_iter().map(|b| (b.id.clone(), b)).collect(),
        }
    }

    pub fn block(&self, id: &BlockId) -> Option<&Block> {
        self.blocks.get(id)
    }

    pub fn entry(&self) -> &Block {
        &self.blocks[&self.entry_block]
    }

    /// Blocks ending in `ret`.
    pub fn exit_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks
            .values()
            .filter(|b| matches!(b.terminator, Terminator::Return(_)))
    }

    fn reachable_blocks(&self) -> BTreeSet<&BlockId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([&self.entry_block]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(block) = self.blocks.get(id) {
                queue.extend(block.terminator.successors());
            }
        }
        seen
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    UnreachableBlock { function: FunctionName, block: BlockId },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnreachableBlock { function, block } => {
                write!(f, "block `{block}` in `{function}` is unreachable")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error{}: {message}", location_suffix(.function, .line))]
    Validation {
        function: Option<FunctionName>,
        line: Option<usize>,
        message: String,
    },
}

fn location_suffix(function: &Option<FunctionName>, line: &Option<usize>) -> String {
    match (function, line) {
        (Some(f), Some(l)) => format!(" in `{f}` (line {l})"),
        (Some(f), None) => format!(" in `{f}`"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl IrError {
    fn validation(function: Option<&str>, message: impl Into<String>) -> Self {
        IrError::Validation {
            function: function.map(str::to_string),
            line: None,
            message: message.into(),
        }
    }
}

/// A validated program. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    name: String,
    functions: BTreeMap<FunctionName, Function>,
    warnings: Vec<Warning>,
}

impl Program {
    pub fn new(name: impl Into<String>, functions: Vec<Function>) -> Result<Self, IrError> {
        let mut map = BTreeMap::new();
        for f in functions {
            let fname = f.name.clone();
            if map.insert(fname.clone(), f).is_some() {
                return Err(IrError::validation(
                    Some(&fname),
                    format!("duplicate function `{fname}`"),
                ));
            }
        }
        let mut program = Program {
            name: name.into(),
            functions: map,
            warnings: Vec::new(),
        };
        program.warnings = program.validate()?;
        Ok(program)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entry(&self) -> &Function {
        &self.functions[ENTRY_FUNCTION]
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.get(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &Function> {
        self.functions.values()
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    pub fn num_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    fn validate(&self) -> Result<Vec<Warning>, IrError> {
        let main = self
            .functions
            .get(ENTRY_FUNCTION)
            .ok_or_else(|| IrError::validation(None, "missing entry function `main`"))?;
        if !main.params.is_empty() {
            return Err(IrError::validation(
                Some(ENTRY_FUNCTION),
                "entry function `main` must take no parameters",
            ));
        }
        let mut warnings = Vec::new();
        for f in self.functions.values() {
            warnings.extend(self.validate_function(f)?);
        }
        Ok(warnings)
    }

    fn validate_function(&self, f: &Function) -> Result<Vec<Warning>, IrError> {
        let err = |msg: String| IrError::validation(Some(&f.name), msg);

        let mut seen_params = BTreeSet::new();
        for p in &f.params {
            if !seen_params.insert(p) {
                return Err(err(format!("duplicate parameter `{p}`")));
            }
        }
        if !f.blocks.contains_key(&f.entry_block) {
            return Err(err(format!("entry block `{}` does not exist", f.entry_block)));
        }
        for (id, block) in &f.blocks {
            if *id != block.id {
                return Err(err(format!("block keyed `{id}` carries id `{}`", block.id)));
            }
            for succ in block.terminator.successors() {
                if !f.blocks.contains_key(succ) {
                    return Err(err(format!("block `{id}` jumps to unknown block `{succ}`")));
                }
            }
            if let Terminator::Branch {
                then_block, else_block, ..
            } = &block.terminator
            {
                if then_block == else_block {
                    return Err(err(format!(
                        "branch in block `{id}` has identical targets `{then_block}`"
                    )));
                }
            }
            for inst in &block.instructions {
                if let Instruction::Call { callee, args, .. } = inst {
                    let target = self
                        .functions
                        .get(callee)
                        .ok_or_else(|| err(format!("unknown callee `{callee}`")))?;
                    if target.params.len() != args.len() {
                        return Err(err(format!(
                            "arity mismatch calling `{callee}`: expected {}, got {}",
                            target.params.len(),
                            args.len()
                        )));
                    }
                }
            }
        }

        let reachable = f.reachable_blocks();
        let warnings = f
            .blocks
            .keys()
            .filter(|id| !reachable.contains(id))
            .map(|id| Warning::UnreachableBlock {
                function: f.name.clone(),
                block: id.clone(),
            })
            .collect();

        self.check_definitions(f, &reachable)?;
        Ok(warnings)
    }

    /// Must-define dataflow: every operand in a reachable block refers to a
    /// parameter or a local assigned on every path reaching the use.
    fn check_definitions(&self, f: &Function, reachable: &BTreeSet<&BlockId>) -> Result<(), IrError> {
        let params: BTreeSet<&str> = f.params.iter().map(String::as_str).collect();
        let mut preds: BTreeMap<&BlockId, Vec<&BlockId>> = BTreeMap::new();
        for (id, block) in &f.blocks {
            if !reachable.contains(id) {
                continue;
            }
            for succ in block.terminator.successors() {
                preds.entry(succ).or_default().push(id);
            }
        }

        // `None` is the top element (everything defined) for the meet.
        let mut out: BTreeMap<&BlockId, Option<BTreeSet<&str>>> = reachable.iter().map(|id| (*id, None)).collect();
        fn block_in<'f>(
            f: &'f Function,
            params: &BTreeSet<&'f str>,
            preds: &BTreeMap<&'f BlockId, Vec<&'f BlockId>>,
            id: &BlockId,
            out: &BTreeMap<&'f BlockId, Option<BTreeSet<&'f str>>>,
        ) -> Option<BTreeSet<&'f str>> {
            if *id == f.entry_block {
                return Some(params.clone());
            }
            let mut acc: Option<BTreeSet<&str>> = None;
            for p in preds.get(id).into_iter().flatten() {
                if let Some(Some(set)) = out.get(p) {
                    acc = Some(match acc {
                        None => set.clone(),
                        Some(a) => a.intersection(set).copied().collect(),
                    });
                }
            }
            acc
        }

        let mut changed = true;
        while changed {
            changed = false;
            for id in reachable {
                let Some(mut defs) = block_in(f, &params, &preds, id, &out) else {
                    continue;
                };
                for inst in &f.blocks[*id].instructions {
                    if let Some(d) = inst.dest() {
                        defs.insert(d);
                    }
                }
                let slot = out.get_mut(id).expect("reachable block");
                if slot.as_ref() != Some(&defs) {
                    *slot = Some(defs);
                    changed = true;
                }
            }
        }

        for id in reachable {
            let block = &f.blocks[*id];
            let mut defs = block_in(f, &params, &preds, id, &out).unwrap_or_default();
            let check = |op: &Operand, defs: &BTreeSet<&str>| match op {
                Operand::Local(name) if !defs.contains(name.as_str()) => Err(IrError::validation(
                    Some(&f.name),
                    format!("use of undefined local `{name}` in block `{id}`"),
                )),
                _ => Ok(()),
            };
            for inst in &block.instructions {
                for op in inst.operands() {
                    check(op, &defs)?;
                }
                if let Some(d) = inst.dest() {
                    defs.insert(d);
                }
            }
            for op in block.terminator.operands() {
                check(op, &defs)?;
            }
        }
        Ok(())
    }
}

/// Number of conditional branch terminators in the program.
pub fn count_branches(p: &Program) -> usize {
    p.functions()
        .flat_map(|f| f.blocks.values())
        .filter(|b| matches!(b.terminator, Terminator::Branch { .. }))
        .count()
}

/// One test case: the values returned by successive `input` reads.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputVector(pub Vec<i32>);

impl InputVector {
    pub fn new(values: Vec<i32>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value seen by the `index`-th read; reads past the end yield 0.
    pub fn get(&self, index: usize) -> i32 {
        self.0.get(index).copied().unwrap_or(0)
    }

    /// Text test-case format: one decimal value per line.
    pub fn to_text(&self) -> String {
        self.0.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn parse_text(text: &str) -> Result<Self, IrError> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let v = trimmed.parse::<i32>().map_err(|e| IrError::Syntax {
                line: i + 1,
                column: line.find(trimmed).unwrap_or(0) + 1,
                message: format!("invalid test-case value `{trimmed}`: {e}"),
            })?;
            values.push(v);
        }
        Ok(Self(values))
    }
}

impl From<Vec<i32>> for InputVector {
    fn from(v: Vec<i32>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ret_main() -> Function {
        Function::new(
            "main",
            vec![],
            vec![Block::new("entry", vec![], Terminator::Return(None))],
        )
    }

    #[test]
    fn missing_main_is_rejected() {
        let f = Function::new("f", vec![], vec![Block::new("entry", vec![], Terminator::Return(None))]);
        let err = Program::new("p", vec![f]).unwrap_err();
        assert!(err.to_string().contains("missing entry function"), "{err}");
    }

    #[test]
    fn main_with_params_is_rejected() {
        let f = Function::new(
            "main",
            vec!["a".into()],
            vec![Block::new("entry", vec![], Terminator::Return(None))],
        );
        assert!(Program::new("p", vec![f]).is_err());
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let main = Function::new(
            "main",
            vec![],
            vec![Block::new(
                "entry",
                vec![Instruction::Call {
                    dest: None,
                    callee: "f".into(),
                    args: vec![],
                }],
                Terminator::Return(None),
            )],
        );
        let f = Function::new(
            "f",
            vec!["x".into()],
            vec![Block::new("entry", vec![], Terminator::Return(None))],
        );
        let err = Program::new("p", vec![main, f]).unwrap_err();
        assert!(err.to_string().contains("arity mismatch"), "{err}");
    }

    #[test]
    fn identical_branch_targets_are_rejected() {
        let main = Function::new(
            "main",
            vec![],
            vec![
                Block::new(
                    "entry",
                    vec![],
                    Terminator::Branch {
                        cmp: CmpOp::Lt,
                        lhs: Operand::Const(0),
                        rhs: Operand::Const(1),
                        then_block: "a".into(),
                        else_block: "a".into(),
                    },
                ),
                Block::new("a", vec![], Terminator::Return(None)),
            ],
        );
        assert!(Program::new("p", vec![main]).is_err());
    }

    #[test]
    fn use_on_one_path_only_is_rejected() {
        // x is assigned only on the `then` path but used after the join.
        let main = Function::new(
            "main",
            vec![],
            vec![
                Block::new(
                    "entry",
                    vec![Instruction::ReadInput { dest: "c".into() }],
                    Terminator::Branch {
                        cmp: CmpOp::Lt,
                        lhs: Operand::local("c"),
                        rhs: Operand::Const(0),
                        then_block: "t".into(),
                        else_block: "join".into(),
                    },
                ),
                Block::new(
                    "t",
                    vec![Instruction::Const {
                        dest: "x".into(),
                        value: 1,
                    }],
                    Terminator::Jump("join".into()),
                ),
                Block::new(
                    "join",
                    vec![Instruction::Print {
                        value: Operand::local("x"),
                    }],
                    Terminator::Return(None),
                ),
            ],
        );
        let err = Program::new("p", vec![main]).unwrap_err();
        assert!(err.to_string().contains("undefined local `x`"), "{err}");
    }

    #[test]
    fn loop_carried_definition_is_accepted() {
        let main = Function::new(
            "main",
            vec![],
            vec![
                Block::new(
                    "entry",
                    vec![Instruction::Const {
                        dest: "i".into(),
                        value: 0,
                    }],
                    Terminator::Jump("head".into()),
                ),
                Block::new(
                    "head",
                    vec![],
                    Terminator::Branch {
                        cmp: CmpOp::Lt,
                        lhs: Operand::local("i"),
                        rhs: Operand::Const(3),
                        then_block: "body".into(),
                        else_block: "done".into(),
                    },
                ),
                Block::new(
                    "body",
                    vec![Instruction::BinOp {
                        dest: "i".into(),
                        op: BinOp::Add,
                        lhs: Operand::local("i"),
                        rhs: Operand::Const(1),
                    }],
                    Terminator::Jump("head".into()),
                ),
                Block::new("done", vec![], Terminator::Return(Some(Operand::local("i")))),
            ],
        );
        let p = Program::new("p", vec![main]).unwrap();
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn unreachable_block_warns() {
        let main = Function::new(
            "main",
            vec![],
            vec![
                Block::new("entry", vec![], Terminator::Return(None)),
                Block::new("dead", vec![], Terminator::Return(None)),
            ],
        );
        let p = Program::new("p", vec![main]).unwrap();
        assert_eq!(
            p.warnings(),
            &[Warning::UnreachableBlock {
                function: "main".into(),
                block: "dead".into()
            }]
        );
    }

    #[test]
    fn straight_line_program_has_no_branches() {
        let p = Program::new("p", vec![ret_main()]).unwrap();
        assert_eq!(count_branches(&p), 0);
    }

    #[test]
    fn wrapping_and_faulting_arithmetic() {
        assert_eq!(BinOp::Add.eval(i32::MAX, 1), Ok(i32::MIN));
        assert_eq!(BinOp::Div.eval(i32::MIN, -1), Ok(i32::MIN));
        assert_eq!(BinOp::Mod.eval(i32::MIN, -1), Ok(0));
        assert_eq!(BinOp::Div.eval(-7, 2), Ok(-3));
        assert_eq!(BinOp::Mod.eval(-7, 2), Ok(-1));
        assert_eq!(BinOp::Div.eval(1, 0), Err(ArithmeticFault));
        assert_eq!(BinOp::Mod.eval(1, 0), Err(ArithmeticFault));
    }

    #[test]
    fn negated_comparison_is_complement() {
        for op in CmpOp::ALL {
            for (a, b) in [(0, 0), (-1, 3), (5, 2)] {
                assert_ne!(op.eval(a, b), op.negate().eval(a, b));
            }
        }
    }

    #[test]
    fn test_case_text_format() {
        let v = InputVector::new(vec![1, -5, i32::MAX]);
        assert_eq!(v.to_text(), "1\n-5\n2147483647\n");
        assert_eq!(InputVector::parse_text(&v.to_text()).unwrap(), v);
        assert!(InputVector::parse_text("12\nabc\n").is_err());
        assert_eq!(InputVector::new(vec![]).get(3), 0);
    }
}
