use std::fmt;

use super::{Expr, Instr, Line, Primitive, Program, Reference};

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Int(n) => write!(f, "{n}"),
            Primitive::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Primitive::Bool(b) => write!(f, "{b}"),
            Primitive::Undef => f.write_str("undef"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Prim(p) => write!(f, "{p}"),
            Expr::Lambda { param, body } => write!(f, "fun({param})@{body}"),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Op(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Var(x) => f.write_str(x),
            Reference::Prop(obj, key) => write!(f, "{obj}[{key}]"),
        }
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Assign(r, e) => write!(f, "{r} = {e}"),
            Instr::NewObject(r) => write!(f, "{r} = {{}}"),
            Instr::Call(r, callee, arg) => write!(f, "{r} = {callee}({arg})"),
            Instr::Return(e) => write!(f, "ret {e}"),
            Instr::Branch(cond, target) => write!(f, "if {cond} {target}"),
        }
    }
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.instr)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, line) in self.lines().iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Canonical source text; `parse_program(&format_program(p)) == Ok(p)`.
pub fn format_program(program: &Program) -> String {
    program.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::NEG_ABS_SOURCE;
    use crate::lang::{parse_program, Label, OpName};

    #[test]
    fn one_line() {
        let p = parse_program("0:   ret   1").unwrap();
        assert_eq!(format_program(&p), "0: ret 1");
    }

    #[test]
    fn neg_abs_round_trips() {
        let p = parse_program(NEG_ABS_SOURCE).unwrap();
        let text = format_program(&p);
        assert_eq!(parse_program(&text).unwrap(), p);
        assert!(text.starts_with("0: if ge(x, 0) 3\n1: x = neg(x)"));
    }

    #[test]
    fn nested_property_reference() {
        let key = Expr::op(
            OpName::Concat,
            vec![Expr::str("p"), Expr::op(OpName::Num2Str, vec![Expr::int(1)])],
        );
        let read = Expr::Ref(Box::new(Reference::prop(Expr::var("x"), key)));
        let p = Program::new(vec![
            (Label(0), Instr::Assign(Reference::var("y"), read)),
            (Label(1), Instr::Return(Expr::var("y"))),
        ])
        .unwrap();
        let text = format_program(&p);
        assert_eq!(text, "0: y = x[concat(\"p\", num2str(1))]\n1: ret y");
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn escapes_round_trip() {
        let p = Program::new(vec![(
            Label(0),
            Instr::Return(Expr::str("a\"b\\c\nd\te#")),
        )])
        .unwrap();
        assert_eq!(parse_program(&format_program(&p)).unwrap(), p);
    }
}
