use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value as Json};

use super::{Domain, DomainError, Prims};
use crate::concrete::Value;
use crate::lang::{Label, Primitive};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Func {
    pub param: String,
    pub body: Label,
}

/// An abstract value: primitives, object allocation sites and closures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsValue {
    pub prims: Prims,
    pub addrs: BTreeSet<Label>,
    pub funcs: BTreeSet<Func>,
}

/// What a value denoting exactly one concrete value denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Singleton {
    Prim(Primitive),
    Addr(Label),
    Func(Func),
}

impl AbsValue {
    pub fn bottom(domain: Domain) -> AbsValue {
        AbsValue {
            prims: Prims::bottom(domain),
            addrs: BTreeSet::new(),
            funcs: BTreeSet::new(),
        }
    }

    pub fn from_prims(prims: Prims) -> AbsValue {
        AbsValue {
            prims,
            addrs: BTreeSet::new(),
            funcs: BTreeSet::new(),
        }
    }

    pub fn prim(domain: Domain, p: &Primitive) -> AbsValue {
        AbsValue::from_prims(Prims::of(domain, p))
    }

    pub fn addr(domain: Domain, site: Label) -> AbsValue {
        let mut v = AbsValue::bottom(domain);
        v.addrs.insert(site);
        v
    }

    pub fn func(domain: Domain, param: impl Into<String>, body: Label) -> AbsValue {
        let mut v = AbsValue::bottom(domain);
        v.funcs.insert(Func {
            param: param.into(),
            body,
        });
        v
    }

    /// The abstraction of a single concrete value; addresses map to their site.
    pub fn from_concrete(domain: Domain, v: &Value) -> AbsValue {
        match v {
            Value::Prim(p) => AbsValue::prim(domain, p),
            Value::Obj(a) => AbsValue::addr(domain, a.site),
            Value::Closure { param, body } => AbsValue::func(domain, param.clone(), *body),
        }
    }

    pub fn domain(&self) -> Domain {
        self.prims.domain()
    }

    pub fn is_bottom(&self) -> bool {
        self.prims.is_bottom() && self.addrs.is_empty() && self.funcs.is_empty()
    }

    pub fn try_join(&self, o: &AbsValue) -> Result<AbsValue, DomainError> {
        Ok(AbsValue {
            prims: self.prims.try_join(&o.prims)?,
            addrs: self.addrs.union(&o.addrs).copied().collect(),
            funcs: self.funcs.union(&o.funcs).cloned().collect(),
        })
    }

    /// Least upper bound. Panics if the domains differ; use
    /// [`AbsValue::try_join`] where that is a data error.
    pub fn join(&self, o: &AbsValue) -> AbsValue {
        self.try_join(o)
            .unwrap_or_else(|e| panic!("joining values: {e}"))
    }

    pub fn join_in(&mut self, o: &AbsValue) {
        *self = self.join(o);
    }

    pub fn try_leq(&self, o: &AbsValue) -> Result<bool, DomainError> {
        Ok(self.prims.try_leq(&o.prims)?
            && self.addrs.is_subset(&o.addrs)
            && self.funcs.is_subset(&o.funcs))
    }

    pub fn leq(&self, o: &AbsValue) -> bool {
        self.try_leq(o).unwrap_or(false)
    }

    /// Membership of a concrete value in the concretization. Addresses are
    /// matched by allocation site.
    pub fn contains(&self, v: &Value) -> bool {
        match v {
            Value::Prim(p) => self.prims.contains(p),
            Value::Obj(a) => self.addrs.contains(&a.site),
            Value::Closure { param, body } => self.funcs.contains(&Func {
                param: param.clone(),
                body: *body,
            }),
        }
    }

    /// `Some` iff the value denotes exactly one concrete value (an address
    /// counts as one when its site has a single instance; the caller checks
    /// the counter).
    pub fn singleton(&self) -> Option<Singleton> {
        let n = self.prims.kinds() + self.addrs.len() + self.funcs.len();
        if n != 1 {
            return None;
        }
        if let Some(a) = self.addrs.first() {
            return Some(Singleton::Addr(*a));
        }
        if let Some(f) = self.funcs.first() {
            return Some(Singleton::Func(f.clone()));
        }
        self.prims.singleton().map(Singleton::Prim)
    }

    pub fn to_json(&self) -> Json {
        json!({
            "prims": self.prims.to_json(),
            "addrs": self.addrs.iter().map(|a| a.0).collect::<Vec<_>>(),
            "funcs": self
                .funcs
                .iter()
                .map(|f| json!({ "param": f.param, "body": f.body.0 }))
                .collect::<Vec<_>>(),
        })
    }

    /// Parses the full `{"prims", "addrs", "funcs"}` form, a bare primitive
    /// object such as `{"sign": ["-"]}`, or a JSON scalar (abstracted).
    pub fn from_json(j: &Json, domain: Domain) -> Result<AbsValue, DomainError> {
        let bad = |m: String| DomainError::Json(m);
        if let Some(p) = crate::concrete::prim_from_json(j) {
            return Ok(AbsValue::prim(domain, &p));
        }
        let obj = j
            .as_object()
            .ok_or_else(|| bad(format!("expected an abstract value, found {j}")))?;
        let full = ["prims", "addrs", "funcs"];
        if !obj.keys().any(|k| full.contains(&k.as_str())) {
            return Ok(AbsValue::from_prims(Prims::from_json(j, domain)?));
        }
        let mut out = AbsValue::bottom(domain);
        for (k, v) in obj {
            match k.as_str() {
                "prims" => out.prims = Prims::from_json(v, domain)?,
                "addrs" => {
                    for a in v.as_array().ok_or_else(|| bad("`addrs` must be a list".into()))? {
                        let n = a
                            .as_u64()
                            .and_then(|n| u32::try_from(n).ok())
                            .ok_or_else(|| bad(format!("bad site {a}")))?;
                        out.addrs.insert(Label(n));
                    }
                }
                "funcs" => {
                    for f in v.as_array().ok_or_else(|| bad("`funcs` must be a list".into()))? {
                        let param = f
                            .get("param")
                            .and_then(Json::as_str)
                            .ok_or_else(|| bad(format!("bad function {f}")))?;
                        let body = f
                            .get("body")
                            .and_then(Json::as_u64)
                            .and_then(|n| u32::try_from(n).ok())
                            .ok_or_else(|| bad(format!("bad function {f}")))?;
                        out.funcs.insert(Func {
                            param: param.to_string(),
                            body: Label(body),
                        });
                    }
                }
                other => return Err(bad(format!("unknown field `{other}`"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for AbsValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.prims)?;
        if !self.addrs.is_empty() {
            let sites: Vec<String> = self.addrs.iter().map(|a| format!("@{a}")).collect();
            write!(f, "+{{{}}}", sites.join(","))?;
        }
        if !self.funcs.is_empty() {
            let fs: Vec<String> = self
                .funcs
                .iter()
                .map(|x| format!("fun({})@{}", x.param, x.body))
                .collect();
            write!(f, "+{{{}}}", fs.join(","))?;
        }
        Ok(())
    }
}
