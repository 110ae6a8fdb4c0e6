use super::{is_valid_identifier, Expr, Instr, Label, LangError, OpName, Primitive, Program, Reference};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Colon,
    Assign,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    At,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("integer {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`=`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::At => "`@`".into(),
        }
    }
}

fn lex(line_no: usize, text: &str) -> Result<Vec<Tok>, LangError> {
    let err = |message: String| LangError::SyntaxError { line: line_no, message };
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            ':' => {
                toks.push(Tok::Colon);
                i += 1;
            }
            '=' => {
                toks.push(Tok::Assign);
                i += 1;
            }
            '{' => {
                toks.push(Tok::LBrace);
                i += 1;
            }
            '}' => {
                toks.push(Tok::RBrace);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            '[' => {
                toks.push(Tok::LBracket);
                i += 1;
            }
            ']' => {
                toks.push(Tok::RBracket);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '@' => {
                toks.push(Tok::At);
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err("unterminated string literal".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                other => {
                                    return Err(err(format!("bad escape sequence \\{other:?}")))
                                }
                            };
                            s.push(esc);
                            i += 2;
                        }
                        Some(&c) => {
                            s.push(c);
                            i += 1;
                        }
                    }
                }
                toks.push(Tok::Str(s));
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = i;
                i += 1;
                while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let n = lit
                    .parse::<i64>()
                    .map_err(|_| err(format!("integer literal {lit} out of range")))?;
                toks.push(Tok::Int(n));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while chars
                    .get(i)
                    .is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_')
                {
                    i += 1;
                }
                toks.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        }
    }
    Ok(toks)
}

struct LineParser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
}

impl LineParser {
    fn err(&self, message: impl Into<String>) -> LangError {
        LangError::SyntaxError {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), LangError> {
        match self.bump() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(self.err(format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(self.err(format!("expected {}, found end of line", want.describe()))),
        }
    }

    fn label(&mut self) -> Result<Label, LangError> {
        match self.bump() {
            Some(Tok::Int(n)) if (0..=u32::MAX as i64).contains(&n) => Ok(Label(n as u32)),
            Some(t) => Err(self.err(format!("expected a label, found {}", t.describe()))),
            None => Err(self.err("expected a label, found end of line")),
        }
    }

    fn identifier(&mut self) -> Result<String, LangError> {
        match self.bump() {
            Some(Tok::Ident(name)) if is_valid_identifier(&name) => Ok(name),
            Some(Tok::Ident(name)) => Err(self.err(format!("`{name}` is reserved"))),
            Some(t) => Err(self.err(format!("expected an identifier, found {}", t.describe()))),
            None => Err(self.err("expected an identifier, found end of line")),
        }
    }

    fn instr(&mut self) -> Result<Instr, LangError> {
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "ret" => {
                self.bump();
                Ok(Instr::Return(self.expr()?))
            }
            Some(Tok::Ident(kw)) if kw == "if" => {
                self.bump();
                let cond = self.expr()?;
                let target = self.label()?;
                Ok(Instr::Branch(cond, target))
            }
            _ => {
                let target = match self.expr()? {
                    Expr::Ref(r) => *r,
                    _ => return Err(self.err("left-hand side of `=` must be a reference")),
                };
                self.expect(Tok::Assign)?;
                if self.peek() == Some(&Tok::LBrace) {
                    self.bump();
                    self.expect(Tok::RBrace)?;
                    return Ok(Instr::NewObject(target));
                }
                let rhs = self.expr()?;
                if self.peek() == Some(&Tok::LParen) {
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Instr::Call(target, rhs, arg));
                }
                Ok(Instr::Assign(target, rhs))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut e = self.primary()?;
        while self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let key = self.expr()?;
            self.expect(Tok::RBracket)?;
            e = Expr::Ref(Box::new(Reference::prop(e, key)));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Expr::Prim(Primitive::Int(n))),
            Some(Tok::Str(s)) => Ok(Expr::Prim(Primitive::Str(s))),
            Some(Tok::Ident(word)) => match word.as_str() {
                "true" => Ok(Expr::Prim(Primitive::Bool(true))),
                "false" => Ok(Expr::Prim(Primitive::Bool(false))),
                "undef" => Ok(Expr::Prim(Primitive::Undef)),
                "fun" => {
                    self.expect(Tok::LParen)?;
                    let param = self.identifier()?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::At)?;
                    let body = self.label()?;
                    Ok(Expr::Lambda { param, body })
                }
                name => {
                    if let Some(op) = OpName::from_name(name) {
                        self.expect(Tok::LParen)?;
                        let mut args = vec![self.expr()?];
                        while self.peek() == Some(&Tok::Comma) {
                            self.bump();
                            args.push(self.expr()?);
                        }
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Op(op, args))
                    } else if is_valid_identifier(name) {
                        Ok(Expr::var(name))
                    } else {
                        Err(self.err(format!("`{name}` is reserved")))
                    }
                }
            },
            Some(t) => Err(self.err(format!("expected an expression, found {}", t.describe()))),
            None => Err(self.err("expected an expression, found end of line")),
        }
    }
}

/// Parses the one-instruction-per-line text format. Blank lines and `#`
/// comments are ignored.
pub fn parse_program(text: &str) -> Result<Program, LangError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks = lex(line_no, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser {
            toks,
            pos: 0,
            line: line_no,
        };
        let label = p.label()?;
        p.expect(Tok::Colon)?;
        let instr = p.instr()?;
        if let Some(t) = p.peek() {
            return Err(p.err(format!("unexpected {} after instruction", t.describe())));
        }
        lines.push((label, instr));
    }
    if lines.is_empty() {
        return Err(LangError::SyntaxError {
            line: 1,
            message: "program has no instructions".into(),
        });
    }
    let program = Program::new(lines)?;
    for line in program.lines() {
        for target in super::validate::referenced_labels(&line.instr) {
            if !program.contains(target) {
                return Err(LangError::DanglingLabel {
                    label: target,
                    at: line.label,
                });
            }
        }
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::NEG_ABS_SOURCE;

    #[test]
    fn minimal_program() {
        let p = parse_program("0: ret 1").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.entry(), Label(0));
        assert_eq!(p.instr(Label(0)), Some(&Instr::Return(Expr::int(1))));
    }

    #[test]
    fn neg_abs_has_six_lines() {
        let p = parse_program(NEG_ABS_SOURCE).unwrap();
        assert_eq!(p.labels().collect::<Vec<_>>(), (0..6).map(Label).collect::<Vec<_>>());
        assert_eq!(
            p.instr(Label(0)),
            Some(&Instr::Branch(
                Expr::op(OpName::Ge, vec![Expr::var("x"), Expr::int(0)]),
                Label(3)
            ))
        );
    }

    #[test]
    fn dangling_branch_target() {
        assert_eq!(
            parse_program("0: if ge(x,0) 9"),
            Err(LangError::DanglingLabel {
                label: Label(9),
                at: Label(0)
            })
        );
    }

    #[test]
    fn duplicate_label() {
        assert_eq!(
            parse_program("0: ret 1\n0: ret 2"),
            Err(LangError::DuplicateLabel(Label(0)))
        );
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        match parse_program("0: x = 1\n\n2: x = = 3") {
            Err(LangError::SyntaxError { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_program("0: 1 = 2"),
            Err(LangError::SyntaxError { .. })
        ));
        assert!(matches!(
            parse_program("0: ret add"),
            Err(LangError::SyntaxError { .. })
        ));
    }

    #[test]
    fn comments_and_strings() {
        let p = parse_program("# header\n0: s = \"a#b\" # trailing\n1: ret s").unwrap();
        assert_eq!(
            p.instr(Label(0)),
            Some(&Instr::Assign(Reference::var("s"), Expr::str("a#b")))
        );
    }

    #[test]
    fn calls_objects_and_properties() {
        let p = parse_program(
            "0: o = {}\n1: o[\"f\"] = fun(a)@4\n2: r = o[\"f\"](-3)\n3: ret r\n4: ret a",
        )
        .unwrap();
        assert_eq!(p.instr(Label(0)), Some(&Instr::NewObject(Reference::var("o"))));
        assert_eq!(
            p.instr(Label(2)),
            Some(&Instr::Call(
                Reference::var("r"),
                Expr::Ref(Box::new(Reference::prop(Expr::var("o"), Expr::str("f")))),
                Expr::int(-3)
            ))
        );
    }
}
