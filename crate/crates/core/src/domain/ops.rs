use log::debug;

use super::prims::{self, Arith, Cmp};
use super::{AbsValue, Prims};
use crate::lang::OpName;

fn cmp_of(op: OpName) -> Option<Cmp> {
    Some(match op {
        OpName::Lt => Cmp::Lt,
        OpName::Le => Cmp::Le,
        OpName::Gt => Cmp::Gt,
        OpName::Ge => Cmp::Ge,
        OpName::Eq => Cmp::Eq,
        _ => return None,
    })
}

/// Element-wise lifting of the operator table. Operand components of the
/// wrong type contribute nothing (the concrete operation would be stuck).
pub fn abstract_apply_op(op: OpName, args: &[AbsValue]) -> AbsValue {
    assert_eq!(args.len(), op.arity(), "{op}: arity");
    let domain = args[0].domain();
    let k = domain.str_bound();
    let bottom = Prims::bottom(domain);
    if args
        .iter()
        .any(|a| op != OpName::Typeof && (!a.addrs.is_empty() || !a.funcs.is_empty()))
    {
        debug!("{op}: non-primitive operand components ignored");
    }
    let p: Vec<&Prims> = args.iter().map(|a| &a.prims).collect();
    let out = match op {
        OpName::Add | OpName::Sub | OpName::Mul => {
            let arith = match op {
                OpName::Add => Arith::Add,
                OpName::Sub => Arith::Sub,
                _ => Arith::Mul,
            };
            bottom.with_ints(p[0].ints().arith(arith, p[1].ints()))
        }
        OpName::Neg => bottom.with_ints(p[0].ints().neg()),
        OpName::Lt | OpName::Le | OpName::Gt | OpName::Ge | OpName::Eq => {
            let cmp = cmp_of(op).expect("comparison");
            let (t, f) = p[0].ints().compare(cmp, p[1].ints());
            prims::prims_with_bools(bottom, t, f)
        }
        OpName::Not => prims::prims_with_bools(bottom, p[0].may_be_false(), p[0].may_be_true()),
        OpName::And | OpName::Or => {
            let (a, b) = (p[0], p[1]);
            let mut t = false;
            let mut f = false;
            for x in [true, false] {
                for y in [true, false] {
                    let has = |v: &Prims, b: bool| if b { v.may_be_true() } else { v.may_be_false() };
                    if has(a, x) && has(b, y) {
                        let r = if op == OpName::And { x && y } else { x || y };
                        if r {
                            t = true;
                        } else {
                            f = true;
                        }
                    }
                }
            }
            prims::prims_with_bools(bottom, t, f)
        }
        OpName::Concat => prims::prims_with_strs(bottom, prims::concat_strs(p[0].strs(), p[1].strs(), k)),
        OpName::Num2Str => prims::prims_with_strs(bottom, prims::num2str(p[0].ints(), k)),
        OpName::Typeof => {
            let a = &args[0];
            let mut names: Vec<&str> = Vec::new();
            if a.prims.has_ints() {
                names.push("number");
            }
            if !a.prims.strs().is_empty() {
                names.push("string");
            }
            if a.prims.may_be_true() || a.prims.may_be_false() {
                names.push("boolean");
            }
            if a.prims.may_be_undef() {
                names.push("undefined");
            }
            if !a.addrs.is_empty() {
                names.push("object");
            }
            if !a.funcs.is_empty() {
                names.push("function");
            }
            if names.is_empty() {
                bottom
            } else {
                Prims::of_strs(domain, prims::str_set(&names))
            }
        }
    };
    AbsValue::from_prims(out)
}

/// Refines `v` under the assumption that `v op c` evaluated to `outcome`.
/// The integer component is filtered and everything else dropped, since
/// every comparison is stuck on a non-integer operand.
/// Returns `None` for operators that are not integer comparisons.
pub fn refine_comparison(op: OpName, v: &AbsValue, c: i64, outcome: bool) -> Option<AbsValue> {
    let cmp = cmp_of(op)?;
    let mut out = v.clone();
    out.prims = v.prims.with_ints(v.prims.ints().filter(cmp, c, outcome));
    // Non-integer operands make the comparison stuck; they cannot take
    // either edge.
    out.prims = out.prims.int_part();
    out.addrs.clear();
    out.funcs.clear();
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Sign, SignSet, Strs};
    use crate::lang::Primitive;
    use std::collections::BTreeSet;

    fn signs(s: &[Sign]) -> AbsValue {
        AbsValue::from_prims(Prims::of_signs(SignSet::of(s)))
    }

    fn bools(t: bool, f: bool) -> AbsValue {
        AbsValue::from_prims(Prims::of_bools(Domain::Sign, t, f))
    }

    #[test]
    fn neg_flips_signs() {
        use Sign::*;
        assert_eq!(abstract_apply_op(OpName::Neg, &[signs(&[Zero, Pos])]), signs(&[Neg, Zero]));
        assert!(abstract_apply_op(OpName::Neg, &[AbsValue::bottom(Domain::Sign)]).is_bottom());
    }

    #[test]
    fn ge_against_zero() {
        use Sign::*;
        let zero = signs(&[Zero]);
        assert_eq!(
            abstract_apply_op(OpName::Ge, &[signs(&[Neg, Zero, Pos]), zero.clone()]),
            bools(true, true)
        );
        assert_eq!(abstract_apply_op(OpName::Ge, &[signs(&[Neg]), zero.clone()]), bools(false, true));
        assert_eq!(abstract_apply_op(OpName::Ge, &[signs(&[Zero, Pos]), zero]), bools(true, false));
    }

    #[test]
    fn strings_and_typeof() {
        let d = Domain::Sign;
        let p = AbsValue::prim(d, &Primitive::Str("p".into()));
        let one = abstract_apply_op(OpName::Num2Str, &[AbsValue::prim(d, &Primitive::Int(0))]);
        let key = abstract_apply_op(OpName::Concat, &[p, one]);
        assert_eq!(key.prims.strs(), &Strs::Set(BTreeSet::from(["p0".to_string()])));
        let k = abstract_apply_op(OpName::Num2Str, &[signs(&[Sign::Pos])]);
        assert_eq!(k.prims.strs(), &Strs::Top);
        let mut v = AbsValue::func(d, "a", crate::lang::Label(1));
        v.prims.add(&Primitive::Int(3));
        let t = abstract_apply_op(OpName::Typeof, &[v]);
        assert_eq!(
            t.prims.strs(),
            &Strs::Set(BTreeSet::from(["function".to_string(), "number".to_string()]))
        );
    }

    #[test]
    fn kset_arith_is_elementwise() {
        let d = Domain::KSet(4);
        let a = AbsValue::from_prims(Prims::of_ints(d, [1, 2]));
        let b = AbsValue::from_prims(Prims::of_ints(d, [10]));
        assert_eq!(
            abstract_apply_op(OpName::Add, &[a, b]),
            AbsValue::from_prims(Prims::of_ints(d, [11, 12]))
        );
    }

    #[test]
    fn refinement_filters_ints() {
        use Sign::*;
        let all = signs(&[Neg, Zero, Pos]);
        assert_eq!(refine_comparison(OpName::Ge, &all, 0, true), Some(signs(&[Zero, Pos])));
        assert_eq!(refine_comparison(OpName::Ge, &all, 0, false), Some(signs(&[Neg])));
        assert_eq!(refine_comparison(OpName::Add, &all, 0, false), None);
    }
}
