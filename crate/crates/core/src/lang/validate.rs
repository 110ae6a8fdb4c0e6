use std::fmt;

use serde::Serialize;

use super::{is_valid_identifier, visit_instr_exprs, visit_instr_refs, Expr, Instr, Label, Program, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum DiagnosticKind {
    DanglingLabel,
    ArityMismatch,
    InvalidIdentifier,
    FallsOffEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub label: Label,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.label, self.kind, self.message)
    }
}

/// Labels an instruction mentions: branch targets and lambda bodies.
pub(crate) fn referenced_labels(instr: &Instr) -> Vec<Label> {
    let mut out = Vec::new();
    if let Instr::Branch(_, target) = instr {
        out.push(*target);
    }
    visit_instr_exprs(instr, &mut |e| {
        if let Expr::Lambda { body, .. } = e {
            out.push(*body);
        }
    });
    out
}

/// Static checks. An empty result means every label resolves, every
/// operator has the right arity, identifiers are well formed, and the last
/// line cannot fall through.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for line in program.lines() {
        let at = line.label;
        for target in referenced_labels(&line.instr) {
            if !program.contains(target) {
                out.push(Diagnostic {
                    label: at,
                    kind: DiagnosticKind::DanglingLabel,
                    message: format!("label {target} does not exist"),
                });
            }
        }
        visit_instr_exprs(&line.instr, &mut |e| match e {
            Expr::Op(op, args) if args.len() != op.arity() => out.push(Diagnostic {
                label: at,
                kind: DiagnosticKind::ArityMismatch,
                message: format!("{op} takes {} argument(s), got {}", op.arity(), args.len()),
            }),
            Expr::Lambda { param, .. } if !is_valid_identifier(param) => out.push(Diagnostic {
                label: at,
                kind: DiagnosticKind::InvalidIdentifier,
                message: format!("invalid parameter name {param:?}"),
            }),
            _ => {}
        });
        visit_instr_refs(&line.instr, &mut |r| {
            if let Reference::Var(x) = r {
                if !is_valid_identifier(x) {
                    out.push(Diagnostic {
                        label: at,
                        kind: DiagnosticKind::InvalidIdentifier,
                        message: format!("invalid identifier {x:?}"),
                    });
                }
            }
        });
    }
    let last = program.lines().last().expect("programs are non-empty");
    let terminal = match &last.instr {
        Instr::Return(_) => true,
        Instr::Branch(Expr::Prim(super::Primitive::Bool(true)), _) => true,
        _ => false,
    };
    if !terminal {
        out.push(Diagnostic {
            label: last.label,
            kind: DiagnosticKind::FallsOffEnd,
            message: "last line is neither a return nor an unconditional jump".into(),
        });
    }
    out
}
