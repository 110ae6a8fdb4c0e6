use super::{AbsValue, Ints, Sign, Strs};
use crate::concrete::{Address, Value};
use crate::lang::{Label, Primitive};

/// Default integer range for enumerating sign concretizations.
pub const DEFAULT_INT_CAP: i64 = 8;

/// A finite enumeration, or the reason none exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gamma<T> {
    Values(Vec<T>),
    NonEnumerable(String),
}

impl<T> Gamma<T> {
    pub fn values(self) -> Option<Vec<T>> {
        match self {
            Gamma::Values(v) => Some(v),
            Gamma::NonEnumerable(_) => None,
        }
    }
}

/// Concretization of a value without addresses; sign elements are
/// enumerated within `[-cap, cap]`.
pub fn gamma_value(v: &AbsValue, cap: i64) -> Gamma<Value> {
    gamma_value_with(v, cap, &|_| None)
}

/// Concretization where each abstract address is resolved to a concrete
/// one by `materialize`; unresolved addresses make the value non-enumerable.
pub fn gamma_value_with(
    v: &AbsValue,
    cap: i64,
    materialize: &dyn Fn(Label) -> Option<Address>,
) -> Gamma<Value> {
    let mut out = Vec::new();
    match v.prims.ints() {
        Ints::Signs(s) => {
            for g in s.iter() {
                match g {
                    Sign::Neg => out.extend((-cap..=-1).map(Value::int)),
                    Sign::Zero => out.push(Value::int(0)),
                    Sign::Pos => out.extend((1..=cap).map(Value::int)),
                }
            }
        }
        Ints::Set(set) => out.extend(set.iter().map(|n| Value::int(*n))),
        Ints::Top => return Gamma::NonEnumerable("integer top".into()),
    }
    match v.prims.strs() {
        Strs::Set(set) => out.extend(set.iter().map(|s| Value::str(s.clone()))),
        Strs::Top => return Gamma::NonEnumerable("string top".into()),
    }
    if v.prims.may_be_false() {
        out.push(Value::bool(false));
    }
    if v.prims.may_be_true() {
        out.push(Value::bool(true));
    }
    if v.prims.may_be_undef() {
        out.push(Value::Prim(Primitive::Undef));
    }
    for site in &v.addrs {
        match materialize(*site) {
            Some(a) => out.push(Value::Obj(a)),
            None => return Gamma::NonEnumerable(format!("address at site {site}")),
        }
    }
    for f in &v.funcs {
        out.push(Value::Closure {
            param: f.param.clone(),
            body: f.body,
        });
    }
    Gamma::Values(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Prims, SignSet};

    fn signs(s: &[Sign]) -> AbsValue {
        AbsValue::from_prims(Prims::of_signs(SignSet::of(s)))
    }

    #[test]
    fn sign_enumeration_respects_cap() {
        assert_eq!(gamma_value(&signs(&[Sign::Zero]), 3), Gamma::Values(vec![Value::int(0)]));
        assert_eq!(
            gamma_value(&signs(&[Sign::Neg]), 3),
            Gamma::Values(vec![Value::int(-3), Value::int(-2), Value::int(-1)])
        );
    }

    #[test]
    fn tops_are_flagged() {
        let v = AbsValue::from_prims(Prims::of_strs(Domain::Sign, Strs::Top));
        assert!(matches!(gamma_value(&v, 3), Gamma::NonEnumerable(_)));
        let v = AbsValue::addr(Domain::Sign, Label(1));
        assert!(matches!(gamma_value(&v, 3), Gamma::NonEnumerable(_)));
        let a = Address { site: Label(1), id: 0 };
        assert_eq!(
            gamma_value_with(&v, 3, &|_| Some(a)),
            Gamma::Values(vec![Value::Obj(a)])
        );
    }

    #[test]
    fn every_enumerated_value_is_contained() {
        let mut v = signs(&[Sign::Neg, Sign::Pos]);
        v.prims.add(&Primitive::Str("s".into()));
        v.prims.add(&Primitive::Bool(false));
        for c in gamma_value(&v, 4).values().unwrap() {
            assert!(v.contains(&c), "{c}");
        }
    }
}
