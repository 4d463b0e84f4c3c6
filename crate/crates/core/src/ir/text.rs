//! Line-oriented text format (`.mir`).
//!
//! ```text
//! program demo
//! func main()
//! block entry:
//!   x = input
//!   br lt x 0 -> neg, done
//! block neg:
//!   print x
//!   jmp done
//! block done:
//!   ret
//! ```
//!
//! The first block listed in a function is its entry block. `#` starts a
//! comment that runs to the end of the line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{BinOp, Block, BlockId, CmpOp, Function, Instruction, IrError, Operand, Program, Terminator};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Colon,
    Assign,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Arrow => "`->`".into(),
        }
    }
}

struct Line {
    number: usize,
    toks: Vec<(Tok, usize)>,
    end_col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> IrError {
    IrError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(number: usize, raw: &str) -> Result<Line, IrError> {
    let text = raw.split('#').next().unwrap_or("");
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, col));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, col));
                i += 1;
            }
            ':' => {
                toks.push((Tok::Colon, col));
                i += 1;
            }
            '=' => {
                toks.push((Tok::Assign, col));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                toks.push((Tok::Arrow, col));
                i += 2;
            }
            '-' | '0'..='9' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<i64>()
                    .map_err(|_| syntax(number, col, format!("malformed integer `{s}`")))?;
                toks.push((Tok::Int(v), col));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => return Err(syntax(number, col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(Line {
        number,
        toks,
        end_col: chars.len() + 1,
    })
}

struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Self { line, pos: 0 }
    }

    fn col(&self) -> usize {
        self.line
            .toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.line.end_col)
    }

    fn err(&self, message: impl Into<String>) -> IrError {
        syntax(self.line.number, self.col(), message)
    }

    fn peek(&self) -> Option<&Tok> {
        self.line.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.line.toks.get(self.pos).map(|(t, _)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), IrError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(self.err(format!("expected {}, found end of line", want.describe()))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {}", t.describe()))),
            None => Err(self.err(format!("expected {what}, found end of line"))),
        }
    }

    fn int(&mut self) -> Result<i32, IrError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = i32::try_from(*v).map_err(|_| self.err(format!("literal {v} out of int32 range")))?;
                self.pos += 1;
                Ok(v)
            }
            Some(t) => Err(self.err(format!("expected integer, found {}", t.describe()))),
            None => Err(self.err("expected integer, found end of line")),
        }
    }

    fn operand(&mut self) -> Result<Operand, IrError> {
        match self.peek() {
            Some(Tok::Int(_)) => Ok(Operand::Const(self.int()?)),
            Some(Tok::Ident(_)) => Ok(Operand::Local(self.ident("operand")?)),
            Some(t) => Err(self.err(format!("expected operand, found {}", t.describe()))),
            None => Err(self.err("expected operand, found end of line")),
        }
    }

    /// Comma-separated list inside parentheses.
    fn paren_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, IrError>) -> Result<Vec<T>, IrError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => return Ok(out),
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
    }

    fn finish(&self) -> Result<(), IrError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {}", t.describe()))),
        }
    }
}

enum Item {
    Inst(Instruction),
    Term(Terminator),
}

fn parse_body_line(line: &Line) -> Result<Item, IrError> {
    let mut cur = Cursor::new(line);
    let head = cur.ident("instruction")?;
    let item = match head.as_str() {
        "print" => Item::Inst(Instruction::Print { value: cur.operand()? }),
        "call" => {
            let callee = cur.ident("callee name")?;
            let args = cur.paren_list(Cursor::operand)?;
            Item::Inst(Instruction::Call {
                dest: None,
                callee,
                args,
            })
        }
        "br" => {
            let cmp_name = cur.ident("comparison")?;
            let cmp = CmpOp::from_mnemonic(&cmp_name)
                .ok_or_else(|| syntax(line.number, line.toks[1].1, format!("unknown comparison `{cmp_name}`")))?;
            let lhs = cur.operand()?;
            let rhs = cur.operand()?;
            cur.expect(Tok::Arrow)?;
            let then_block = BlockId(cur.ident("block id")?);
            cur.expect(Tok::Comma)?;
            let else_block = BlockId(cur.ident("block id")?);
            Item::Term(Terminator::Branch {
                cmp,
                lhs,
                rhs,
                then_block,
                else_block,
            })
        }
        "jmp" => Item::Term(Terminator::Jump(BlockId(cur.ident("block id")?))),
        "ret" => {
            let value = if cur.peek().is_some() {
                Some(cur.operand()?)
            } else {
                None
            };
            Item::Term(Terminator::Return(value))
        }
        _ => {
            let dest = head;
            cur.expect(Tok::Assign)?;
            let op_col = cur.col();
            let op = cur.ident("operation")?;
            let inst = match op.as_str() {
                "const" => Instruction::Const {
                    dest,
                    value: cur.int()?,
                },
                "input" => Instruction::ReadInput { dest },
                "call" => {
                    let callee = cur.ident("callee name")?;
                    let args = cur.paren_list(Cursor::operand)?;
                    Instruction::Call {
                        dest: Some(dest),
                        callee,
                        args,
                    }
                }
                other => {
                    let bin = BinOp::from_mnemonic(other)
                        .ok_or_else(|| syntax(line.number, op_col, format!("unknown operation `{other}`")))?;
                    Instruction::BinOp {
                        dest,
                        op: bin,
                        lhs: cur.operand()?,
                        rhs: cur.operand()?,
                    }
                }
            };
            Item::Inst(inst)
        }
    };
    cur.finish()?;
    Ok(item)
}

struct OpenFunction {
    name: String,
    params: Vec<String>,
    line: usize,
    blocks: Vec<Block>,
    open: Option<(BlockId, usize, Vec<Instruction>)>,
}

impl OpenFunction {
    fn close_block(&mut self, at_line: usize) -> Result<(), IrError> {
        if let Some((id, line, _)) = &self.open {
            return Err(syntax(
                at_line,
                1,
                format!("block `{id}` (line {line}) has no terminator"),
            ));
        }
        Ok(())
    }

    fn finish(mut self, at_line: usize) -> Result<(Function, usize), IrError> {
        self.close_block(at_line)?;
        if self.blocks.is_empty() {
            return Err(syntax(self.line, 1, format!("function `{}` has no blocks", self.name)));
        }
        let mut seen = BTreeSet::new();
        for b in &self.blocks {
            if !seen.insert(b.id.clone()) {
                return Err(IrError::Validation {
                    function: Some(self.name.clone()),
                    line: Some(self.line),
                    message: format!("duplicate block `{}`", b.id),
                });
            }
        }
        Ok((Function::new(self.name, self.params, self.blocks), self.line))
    }
}

/// Parses and validates a program in the text format.
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    let mut name: Option<String> = None;
    let mut functions: Vec<Function> = Vec::new();
    let mut func_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut current: Option<OpenFunction> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = lex_line(idx + 1, raw)?;
        last_line = idx + 1;
        if line.toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(&line);
        let keyword = match line.toks[0].0 {
            Tok::Ident(ref s) => s.as_str(),
            _ => "",
        };
        match keyword {
            "program" => {
                if name.is_some() {
                    return Err(cur.err("duplicate `program` header"));
                }
                if current.is_some() || !functions.is_empty() {
                    return Err(cur.err("`program` header must come first"));
                }
                cur.next();
                name = Some(cur.ident("program name")?);
                cur.finish()?;
            }
            "func" => {
                if name.is_none() {
                    return Err(cur.err("expected `program <name>` header before functions"));
                }
                if let Some(open) = current.take() {
                    let (f, l) = open.finish(line.number)?;
                    func_lines.insert(f.name.clone(), l);
                    functions.push(f);
                }
                cur.next();
                let fname = cur.ident("function name")?;
                let params = cur.paren_list(|c| c.ident("parameter name"))?;
                cur.finish()?;
                current = Some(OpenFunction {
                    name: fname,
                    params,
                    line: line.number,
                    blocks: Vec::new(),
                    open: None,
                });
            }
            "block" => {
                let Some(open) = current.as_mut() else {
                    return Err(cur.err("`block` outside of a function"));
                };
                open.close_block(line.number)?;
                cur.next();
                let id = BlockId(cur.ident("block id")?);
                cur.expect(Tok::Colon)?;
                cur.finish()?;
                open.open = Some((id, line.number, Vec::new()));
            }
            _ => {
                let Some(open) = current.as_mut() else {
                    return Err(cur.err("instruction outside of a function"));
                };
                let Some((_, _, insts)) = open.open.as_mut() else {
                    return Err(cur.err("instruction outside of a block"));
                };
                match parse_body_line(&line)? {
                    Item::Inst(inst) => insts.push(inst),
                    Item::Term(term) => {
                        let (id, _, insts) = open.open.take().expect("open block");
                        open.blocks.push(Block {
                            id,
                            instructions: insts,
                            terminator: term,
                        });
                    }
                }
            }
        }
    }

    let name = name.ok_or_else(|| syntax(last_line.max(1), 1, "missing `program <name>` header"))?;
    if let Some(open) = current.take() {
        let (f, l) = open.finish(last_line + 1)?;
        func_lines.insert(f.name.clone(), l);
        functions.push(f);
    }

    Program::new(name, functions).map_err(|e| match e {
        IrError::Validation {
            function: Some(f),
            line: None,
            message,
        } => IrError::Validation {
            line: func_lines.get(&f).copied(),
            function: Some(f),
            message,
        },
        other => other,
    })
}

fn write_block(out: &mut String, block: &Block) {
    let _ = writeln!(out, "block {}:", block.id);
    for inst in &block.instructions {
        let _ = match inst {
            Instruction::Const { dest, value } => writeln!(out, "  {dest} = const {value}"),
            Instruction::ReadInput { dest } => writeln!(out, "  {dest} = input"),
            Instruction::BinOp { dest, op, lhs, rhs } => {
                writeln!(out, "  {dest} = {} {lhs} {rhs}", op.mnemonic())
            }
            Instruction::Call { dest, callee, args } => {
                let args = args.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
                match dest {
                    Some(d) => writeln!(out, "  {d} = call {callee}({args})"),
                    None => writeln!(out, "  call {callee}({args})"),
                }
            }
            Instruction::Print { value } => writeln!(out, "  print {value}"),
        };
    }
    let _ = match &block.terminator {
        Terminator::Branch {
            cmp,
            lhs,
            rhs,
            then_block,
            else_block,
        } => writeln!(out, "  br {} {lhs} {rhs} -> {then_block}, {else_block}", cmp.mnemonic()),
        Terminator::Jump(target) => writeln!(out, "  jmp {target}"),
        Terminator::Return(Some(v)) => writeln!(out, "  ret {v}"),
        Terminator::Return(None) => writeln!(out, "  ret"),
    };
}

/// Canonical text: `main` first, then the other functions by name; within a
/// function the entry block first, then the rest by id.
pub fn serialize_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {}", p.name());
    let ordered = std::iter::once(p.entry()).chain(p.functions().filter(|f| f.name != super::ENTRY_FUNCTION));
    for f in ordered {
        let _ = writeln!(out, "func {}({})", f.name, f.params.join(", "));
        write_block(&mut out, f.entry());
        for b in f.blocks.values().filter(|b| b.id != f.entry_block) {
            write_block(&mut out, b);
        }
    }
    out
}
