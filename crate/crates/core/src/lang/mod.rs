//! Syntax of the core language: labeled instructions over references and
//! expressions, with single-parameter closures and open objects.

mod format;
mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::format_program;
pub use parse::parse_program;
pub use validate::{validate, Diagnostic, DiagnosticKind};

/// A program line label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Int(i64),
    Str(String),
    Bool(bool),
    Undef,
}

/// The fixed operator table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpName {
    Add,
    Sub,
    Mul,
    Neg,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Not,
    And,
    Or,
    Concat,
    Num2Str,
    Typeof,
}

impl OpName {
    pub const ALL: [OpName; 15] = [
        OpName::Add,
        OpName::Sub,
        OpName::Mul,
        OpName::Neg,
        OpName::Lt,
        OpName::Le,
        OpName::Gt,
        OpName::Ge,
        OpName::Eq,
        OpName::Not,
        OpName::And,
        OpName::Or,
        OpName::Concat,
        OpName::Num2Str,
        OpName::Typeof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpName::Add => "add",
            OpName::Sub => "sub",
            OpName::Mul => "mul",
            OpName::Neg => "neg",
            OpName::Lt => "lt",
            OpName::Le => "le",
            OpName::Gt => "gt",
            OpName::Ge => "ge",
            OpName::Eq => "eq",
            OpName::Not => "not",
            OpName::And => "and",
            OpName::Or => "or",
            OpName::Concat => "concat",
            OpName::Num2Str => "num2str",
            OpName::Typeof => "typeof",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            OpName::Neg | OpName::Not | OpName::Num2Str | OpName::Typeof => 1,
            _ => 2,
        }
    }

    pub fn from_name(name: &str) -> Option<OpName> {
        OpName::ALL.iter().copied().find(|op| op.name() == name)
    }

    /// Integer comparisons, the only operators branch refinement understands.
    pub fn is_int_comparison(self) -> bool {
        matches!(
            self,
            OpName::Lt | OpName::Le | OpName::Gt | OpName::Ge | OpName::Eq
        )
    }
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Prim(Primitive),
    Lambda { param: String, body: Label },
    Ref(Box<Reference>),
    Op(OpName, Vec<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Ref(Box::new(Reference::Var(name.into())))
    }

    pub fn int(value: i64) -> Expr {
        Expr::Prim(Primitive::Int(value))
    }

    pub fn str(value: impl Into<String>) -> Expr {
        Expr::Prim(Primitive::Str(value.into()))
    }

    pub fn op(op: OpName, args: Vec<Expr>) -> Expr {
        Expr::Op(op, args)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reference {
    Var(String),
    Prop(Box<Expr>, Box<Expr>),
}

impl Reference {
    pub fn var(name: impl Into<String>) -> Reference {
        Reference::Var(name.into())
    }

    pub fn prop(object: Expr, key: Expr) -> Reference {
        Reference::Prop(Box::new(object), Box::new(key))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instr {
    Assign(Reference, Expr),
    NewObject(Reference),
    Call(Reference, Expr, Expr),
    Return(Expr),
    Branch(Expr, Label),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub label: Label,
    pub instr: Instr,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error on line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("duplicate label {0}")]
    DuplicateLabel(Label),
    #[error("label {label} referenced at {at} does not exist")]
    DanglingLabel { label: Label, at: Label },
    #[error("unknown label {0}")]
    UnknownLabel(Label),
    #[error("labels must be strictly increasing: {prev} is followed by {next}")]
    LabelOrder { prev: Label, next: Label },
    #[error("a program needs at least one line")]
    Empty,
}

/// A labeled instruction sequence. Immutable once built.
#[derive(Debug, Clone)]
pub struct Program {
    lines: Vec<Line>,
    index: BTreeMap<Label, usize>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.lines == other.lines
    }
}

impl Eq for Program {}

impl Program {
    /// Builds a program from lines in source order. Labels must be unique and
    /// strictly increasing; dangling label references are left to [`validate`].
    pub fn new(lines: Vec<(Label, Instr)>) -> Result<Program, LangError> {
        if lines.is_empty() {
            return Err(LangError::Empty);
        }
        let mut index = BTreeMap::new();
        let mut prev: Option<Label> = None;
        for (i, (label, _)) in lines.iter().enumerate() {
            if index.insert(*label, i).is_some() {
                return Err(LangError::DuplicateLabel(*label));
            }
            if let Some(p) = prev {
                if p >= *label {
                    return Err(LangError::LabelOrder { prev: p, next: *label });
                }
            }
            prev = Some(*label);
        }
        let lines = lines
            .into_iter()
            .map(|(label, instr)| Line { label, instr })
            .collect();
        Ok(Program { lines, index })
    }

    /// Builds a program whose labels are `0..n` in order.
    pub fn from_instrs(instrs: Vec<Instr>) -> Result<Program, LangError> {
        Program::new(
            instrs
                .into_iter()
                .enumerate()
                .map(|(i, instr)| (Label(i as u32), instr))
                .collect(),
        )
    }

    pub fn entry(&self) -> Label {
        self.lines[0].label
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.lines.iter().map(|l| l.label)
    }

    pub fn contains(&self, label: Label) -> bool {
        self.index.contains_key(&label)
    }

    pub fn instr(&self, label: Label) -> Option<&Instr> {
        self.index.get(&label).map(|&i| &self.lines[i].instr)
    }

    /// The label of the lexically following line, `None` at the last line.
    pub fn next_label(&self, label: Label) -> Result<Option<Label>, LangError> {
        let i = *self.index.get(&label).ok_or(LangError::UnknownLabel(label))?;
        Ok(self.lines.get(i + 1).map(|l| l.label))
    }

    pub fn last_label(&self) -> Label {
        self.lines[self.lines.len() - 1].label
    }

    /// Body labels of every lambda literal in the program.
    pub fn function_entries(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        for line in &self.lines {
            visit_instr_exprs(&line.instr, &mut |e| {
                if let Expr::Lambda { body, .. } = e {
                    out.insert(*body);
                }
            });
        }
        out
    }

    /// Every identifier that appears as a variable or parameter.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for line in &self.lines {
            visit_instr_refs(&line.instr, &mut |r| {
                if let Reference::Var(x) = r {
                    out.insert(x.clone());
                }
            });
            visit_instr_exprs(&line.instr, &mut |e| {
                if let Expr::Lambda { param, .. } = e {
                    out.insert(param.clone());
                }
            });
        }
        out
    }

    pub fn string_literals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for line in &self.lines {
            visit_instr_exprs(&line.instr, &mut |e| {
                if let Expr::Prim(Primitive::Str(s)) = e {
                    out.insert(s.clone());
                }
            });
        }
        out
    }

    /// Number of operator nodes that can manufacture new strings.
    pub fn string_builders(&self) -> usize {
        let mut n = 0;
        for line in &self.lines {
            visit_instr_exprs(&line.instr, &mut |e| {
                if let Expr::Op(OpName::Concat | OpName::Num2Str | OpName::Typeof, _) = e {
                    n += 1;
                }
            });
        }
        n
    }
}

/// Calls `f` on every expression node of `instr`, including nested ones.
pub fn visit_instr_exprs(instr: &Instr, f: &mut impl FnMut(&Expr)) {
    match instr {
        Instr::Assign(r, e) => {
            visit_ref_exprs(r, f);
            visit_expr(e, f);
        }
        Instr::NewObject(r) => visit_ref_exprs(r, f),
        Instr::Call(r, callee, arg) => {
            visit_ref_exprs(r, f);
            visit_expr(callee, f);
            visit_expr(arg, f);
        }
        Instr::Return(e) | Instr::Branch(e, _) => visit_expr(e, f),
    }
}

fn visit_ref_exprs(r: &Reference, f: &mut impl FnMut(&Expr)) {
    if let Reference::Prop(obj, key) = r {
        visit_expr(obj, f);
        visit_expr(key, f);
    }
}

fn visit_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Ref(r) => visit_ref_exprs(r, f),
        Expr::Op(_, args) => args.iter().for_each(|a| visit_expr(a, f)),
        Expr::Prim(_) | Expr::Lambda { .. } => {}
    }
}

fn visit_instr_refs(instr: &Instr, f: &mut impl FnMut(&Reference)) {
    let mut refs: Vec<&Reference> = Vec::new();
    match instr {
        Instr::Assign(r, _) | Instr::NewObject(r) | Instr::Call(r, _, _) => refs.push(r),
        Instr::Return(_) | Instr::Branch(_, _) => {}
    }
    for r in refs {
        f(r);
    }
    visit_instr_exprs(instr, &mut |e| {
        if let Expr::Ref(r) = e {
            f(r);
        }
    });
}

pub(crate) const KEYWORDS: [&str; 6] = ["ret", "if", "true", "false", "undef", "fun"];

/// Identifiers are ASCII words that are neither keywords nor operator names.
pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&name)
        && OpName::from_name(name).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg_abs() -> Program {
        parse_program(crate::examples::NEG_ABS_SOURCE).unwrap()
    }

    #[test]
    fn next_label_follows_source_order() {
        let p = neg_abs();
        assert_eq!(p.next_label(Label(0)).unwrap(), Some(Label(1)));
        assert_eq!(p.next_label(Label(5)).unwrap(), None);
        assert_eq!(
            p.next_label(Label(42)),
            Err(LangError::UnknownLabel(Label(42)))
        );
    }

    #[test]
    fn next_label_is_a_strict_successor() {
        let p = parse_program("3: x = 1\n7: x = 2\n10: ret x").unwrap();
        let labels: Vec<_> = p.labels().collect();
        for w in labels.windows(2) {
            assert_eq!(p.next_label(w[0]).unwrap(), Some(w[1]));
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn program_rejects_bad_label_sequences() {
        let ret = || Instr::Return(Expr::int(1));
        assert_eq!(
            Program::new(vec![(Label(0), ret()), (Label(0), ret())]),
            Err(LangError::DuplicateLabel(Label(0)))
        );
        assert!(matches!(
            Program::new(vec![(Label(2), ret()), (Label(1), ret())]),
            Err(LangError::LabelOrder { .. })
        ));
        assert_eq!(Program::new(vec![]), Err(LangError::Empty));
    }

    #[test]
    fn function_entries_collects_lambda_bodies() {
        let p = parse_program("0: f = fun(a)@2\n1: ret f\n2: ret a").unwrap();
        assert_eq!(p.function_entries(), BTreeSet::from([Label(2)]));
        assert!(p.identifiers().contains("a"));
    }

    #[test]
    fn identifiers_exclude_keywords_and_ops() {
        assert!(is_valid_identifier("x_1"));
        assert!(!is_valid_identifier("ret"));
        assert!(!is_valid_identifier("add"));
        assert!(!is_valid_identifier("1x"));
        assert!(!is_valid_identifier(""));
    }
}
