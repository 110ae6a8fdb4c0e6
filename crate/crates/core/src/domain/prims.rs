use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Map, Value as Json};

use super::{Domain, DomainError};
use crate::lang::Primitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub const ALL: [Sign; 3] = [Sign::Neg, Sign::Zero, Sign::Pos];

    pub fn of(n: i64) -> Sign {
        match n.signum() {
            -1 => Sign::Neg,
            0 => Sign::Zero,
            _ => Sign::Pos,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Neg => "-",
            Sign::Zero => "0",
            Sign::Pos => "+",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Sign> {
        Sign::ALL.into_iter().find(|g| g.symbol() == s)
    }

    fn bit(self) -> u8 {
        match self {
            Sign::Neg => 1,
            Sign::Zero => 2,
            Sign::Pos => 4,
        }
    }

    /// The sign as an interval; `None` stands for an infinite end.
    fn interval(self) -> (Option<i128>, Option<i128>) {
        match self {
            Sign::Neg => (None, Some(-1)),
            Sign::Zero => (Some(0), Some(0)),
            Sign::Pos => (Some(1), None),
        }
    }
}

/// A subset of {-, 0, +}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SignSet(u8);

impl SignSet {
    pub const EMPTY: SignSet = SignSet(0);
    pub const ALL: SignSet = SignSet(7);

    pub fn of(signs: &[Sign]) -> SignSet {
        SignSet(signs.iter().fold(0, |m, s| m | s.bit()))
    }

    pub fn contains(self, s: Sign) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn insert(&mut self, s: Sign) {
        self.0 |= s.bit();
    }

    pub fn iter(self) -> impl Iterator<Item = Sign> {
        Sign::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, o: SignSet) -> SignSet {
        SignSet(self.0 | o.0)
    }

    pub fn leq(self, o: SignSet) -> bool {
        self.0 & !o.0 == 0
    }
}

impl fmt::Display for SignSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s.symbol())?;
        }
        f.write_str("}")
    }
}

/// Interval sum of two signs, as the set of signs it overlaps.
fn sign_add(a: Sign, b: Sign) -> SignSet {
    let (alo, ahi) = a.interval();
    let (blo, bhi) = b.interval();
    let lo = alo.zip(blo).map(|(x, y)| x + y);
    let hi = ahi.zip(bhi).map(|(x, y)| x + y);
    overlapping(lo, hi)
}

fn overlapping(lo: Option<i128>, hi: Option<i128>) -> SignSet {
    let mut out = SignSet::EMPTY;
    for s in Sign::ALL {
        let (slo, shi) = s.interval();
        let below = matches!((hi, slo), (Some(h), Some(l)) if h < l);
        let above = matches!((lo, shi), (Some(l), Some(h)) if l > h);
        if !below && !above {
            out.insert(s);
        }
    }
    out
}

fn sign_neg(s: Sign) -> Sign {
    match s {
        Sign::Neg => Sign::Pos,
        Sign::Zero => Sign::Zero,
        Sign::Pos => Sign::Neg,
    }
}

fn sign_mul(a: Sign, b: Sign) -> Sign {
    match (a, b) {
        (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
        (x, y) if x == y => Sign::Pos,
        _ => Sign::Neg,
    }
}

/// Integer comparison operators the abstract domains understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Cmp {
    pub(crate) fn holds(self, a: i128, b: i128) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Eq => a == b,
        }
    }
}

/// Possible outcomes (true?, false?) of comparing two signs.
fn sign_cmp(op: Cmp, a: Sign, b: Sign) -> (bool, bool) {
    const INF: i128 = 1 << 80;
    let (alo, ahi) = a.interval();
    let (blo, bhi) = b.interval();
    let (alo, ahi) = (alo.unwrap_or(-INF), ahi.unwrap_or(INF));
    let (blo, bhi) = (blo.unwrap_or(-INF), bhi.unwrap_or(INF));
    let single = |lo: i128, hi: i128| lo == hi;
    match op {
        Cmp::Lt => (alo < bhi, ahi >= blo),
        Cmp::Le => (alo <= bhi, ahi > blo),
        Cmp::Gt => (ahi > blo, alo <= bhi),
        Cmp::Ge => (ahi >= blo, alo < bhi),
        Cmp::Eq => {
            let meet = alo <= bhi && blo <= ahi;
            let always = single(alo, ahi) && single(blo, bhi) && alo == blo;
            (meet, !always)
        }
    }
}

/// Integer component of a primitive abstraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ints {
    Signs(SignSet),
    Set(BTreeSet<i64>),
    Top,
}

/// String component: a bounded set, or top once the bound is exceeded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strs {
    Set(BTreeSet<String>),
    Top,
}

impl Strs {
    fn empty() -> Strs {
        Strs::Set(BTreeSet::new())
    }

    fn capped(set: BTreeSet<String>, k: usize) -> Strs {
        if set.len() > k {
            Strs::Top
        } else {
            Strs::Set(set)
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Strs::Set(s) if s.is_empty())
    }

    pub fn contains(&self, s: &str) -> bool {
        match self {
            Strs::Set(set) => set.contains(s),
            Strs::Top => true,
        }
    }

    fn join(&self, o: &Strs, k: usize) -> Strs {
        match (self, o) {
            (Strs::Set(a), Strs::Set(b)) => Strs::capped(a.union(b).cloned().collect(), k),
            _ => Strs::Top,
        }
    }

    fn leq(&self, o: &Strs) -> bool {
        match (self, o) {
            (_, Strs::Top) => true,
            (Strs::Top, Strs::Set(_)) => false,
            (Strs::Set(a), Strs::Set(b)) => a.is_subset(b),
        }
    }
}

/// The primitive part of an abstract value. Carries its domain so that
/// mixing domains is detected rather than silently accepted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prims {
    domain: Domain,
    ints: Ints,
    strs: Strs,
    tt: bool,
    ff: bool,
    undef: bool,
}

impl Prims {
    pub fn bottom(domain: Domain) -> Prims {
        Prims {
            domain,
            ints: match domain {
                Domain::Sign => Ints::Signs(SignSet::EMPTY),
                Domain::KSet(_) => Ints::Set(BTreeSet::new()),
            },
            strs: Strs::empty(),
            tt: false,
            ff: false,
            undef: false,
        }
    }

    /// Every primitive.
    pub fn top(domain: Domain) -> Prims {
        Prims {
            domain,
            ints: match domain {
                Domain::Sign => Ints::Signs(SignSet::ALL),
                Domain::KSet(_) => Ints::Top,
            },
            strs: Strs::Top,
            tt: true,
            ff: true,
            undef: true,
        }
    }

    pub fn of(domain: Domain, p: &Primitive) -> Prims {
        let mut out = Prims::bottom(domain);
        out.add(p);
        out
    }

    /// Integers abstracted under `domain`.
    pub fn of_ints(domain: Domain, ns: impl IntoIterator<Item = i64>) -> Prims {
        let mut out = Prims::bottom(domain);
        for n in ns {
            out.add(&Primitive::Int(n));
        }
        out
    }

    pub fn of_signs(signs: SignSet) -> Prims {
        let mut out = Prims::bottom(Domain::Sign);
        out.ints = Ints::Signs(signs);
        out
    }

    pub fn of_bools(domain: Domain, tt: bool, ff: bool) -> Prims {
        let mut out = Prims::bottom(domain);
        out.tt = tt;
        out.ff = ff;
        out
    }

    pub fn of_strs(domain: Domain, strs: Strs) -> Prims {
        let mut out = Prims::bottom(domain);
        out.strs = match strs {
            Strs::Set(s) => Strs::capped(s, domain.str_bound()),
            Strs::Top => Strs::Top,
        };
        out
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn ints(&self) -> &Ints {
        &self.ints
    }

    pub fn strs(&self) -> &Strs {
        &self.strs
    }

    pub fn may_be_true(&self) -> bool {
        self.tt
    }

    pub fn may_be_false(&self) -> bool {
        self.ff
    }

    pub fn may_be_undef(&self) -> bool {
        self.undef
    }

    /// Adds one concrete primitive (join with its abstraction).
    pub fn add(&mut self, p: &Primitive) {
        match p {
            Primitive::Int(n) => match &mut self.ints {
                Ints::Signs(s) => s.insert(Sign::of(*n)),
                Ints::Set(set) => {
                    set.insert(*n);
                    if let Domain::KSet(k) = self.domain {
                        if set.len() > k {
                            self.ints = Ints::Top;
                        }
                    }
                }
                Ints::Top => {}
            },
            Primitive::Str(s) => {
                if let Strs::Set(set) = &mut self.strs {
                    set.insert(s.clone());
                    if set.len() > self.domain.str_bound() {
                        self.strs = Strs::Top;
                    }
                }
            }
            Primitive::Bool(true) => self.tt = true,
            Primitive::Bool(false) => self.ff = true,
            Primitive::Undef => self.undef = true,
        }
    }

    pub fn has_ints(&self) -> bool {
        match &self.ints {
            Ints::Signs(s) => !s.is_empty(),
            Ints::Set(s) => !s.is_empty(),
            Ints::Top => true,
        }
    }

    pub fn is_bottom(&self) -> bool {
        !self.has_ints() && self.strs.is_empty() && !self.tt && !self.ff && !self.undef
    }

    pub fn contains(&self, p: &Primitive) -> bool {
        match p {
            Primitive::Int(n) => match &self.ints {
                Ints::Signs(s) => s.contains(Sign::of(*n)),
                Ints::Set(set) => set.contains(n),
                Ints::Top => true,
            },
            Primitive::Str(s) => self.strs.contains(s),
            Primitive::Bool(true) => self.tt,
            Primitive::Bool(false) => self.ff,
            Primitive::Undef => self.undef,
        }
    }

    pub fn try_join(&self, o: &Prims) -> Result<Prims, DomainError> {
        if self.domain != o.domain {
            return Err(DomainError::DomainMismatch {
                left: self.domain,
                right: o.domain,
            });
        }
        let ints = match (&self.ints, &o.ints) {
            (Ints::Signs(a), Ints::Signs(b)) => Ints::Signs(a.union(*b)),
            (Ints::Set(a), Ints::Set(b)) => {
                let u: BTreeSet<i64> = a.union(b).copied().collect();
                match self.domain {
                    Domain::KSet(k) if u.len() > k => Ints::Top,
                    _ => Ints::Set(u),
                }
            }
            _ => Ints::Top,
        };
        Ok(Prims {
            domain: self.domain,
            ints,
            strs: self.strs.join(&o.strs, self.domain.str_bound()),
            tt: self.tt || o.tt,
            ff: self.ff || o.ff,
            undef: self.undef || o.undef,
        })
    }

    pub fn join(&self, o: &Prims) -> Prims {
        self.try_join(o)
            .unwrap_or_else(|e| panic!("joining primitives: {e}"))
    }

    pub fn try_leq(&self, o: &Prims) -> Result<bool, DomainError> {
        if self.domain != o.domain {
            return Err(DomainError::DomainMismatch {
                left: self.domain,
                right: o.domain,
            });
        }
        let ints = match (&self.ints, &o.ints) {
            (Ints::Signs(a), Ints::Signs(b)) => a.leq(*b),
            (Ints::Set(a), Ints::Set(b)) => a.is_subset(b),
            (_, Ints::Top) => true,
            (Ints::Top, _) => false,
            _ => false,
        };
        Ok(ints
            && self.strs.leq(&o.strs)
            && (!self.tt || o.tt)
            && (!self.ff || o.ff)
            && (!self.undef || o.undef))
    }

    pub fn leq(&self, o: &Prims) -> bool {
        self.try_leq(o).unwrap_or(false)
    }

    /// The single primitive this element denotes, if any.
    pub fn singleton(&self) -> Option<Primitive> {
        let mut found: Vec<Primitive> = Vec::new();
        match &self.ints {
            Ints::Signs(s) if s.is_empty() => {}
            Ints::Signs(s) if *s == SignSet::of(&[Sign::Zero]) => found.push(Primitive::Int(0)),
            Ints::Set(set) if set.is_empty() => {}
            Ints::Set(set) if set.len() == 1 => found.push(Primitive::Int(*set.first()?)),
            _ => return None,
        }
        match &self.strs {
            Strs::Set(set) if set.is_empty() => {}
            Strs::Set(set) if set.len() == 1 => found.push(Primitive::Str(set.first()?.clone())),
            _ => return None,
        }
        if self.tt {
            found.push(Primitive::Bool(true));
        }
        if self.ff {
            found.push(Primitive::Bool(false));
        }
        if self.undef {
            found.push(Primitive::Undef);
        }
        if found.len() == 1 {
            found.pop()
        } else {
            None
        }
    }

    /// Number of primitive kinds (int, string, true, false, undef) present.
    pub(crate) fn kinds(&self) -> usize {
        usize::from(self.has_ints())
            + usize::from(!self.strs.is_empty())
            + usize::from(self.tt)
            + usize::from(self.ff)
            + usize::from(self.undef)
    }

    pub(crate) fn with_ints(&self, ints: Ints) -> Prims {
        let mut out = self.clone();
        out.ints = ints;
        if let (Domain::KSet(k), Ints::Set(s)) = (out.domain, &out.ints) {
            if s.len() > k {
                out.ints = Ints::Top;
            }
        }
        out
    }

    pub(crate) fn int_part(&self) -> Prims {
        Prims::bottom(self.domain).with_ints(self.ints.clone())
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        match &self.ints {
            Ints::Signs(s) if !s.is_empty() => {
                m.insert("sign".into(), json!(s.iter().map(Sign::symbol).collect::<Vec<_>>()));
            }
            Ints::Set(set) if !set.is_empty() => {
                m.insert("ints".into(), json!(set));
            }
            Ints::Top => {
                m.insert("ints".into(), json!("top"));
            }
            _ => {}
        }
        match &self.strs {
            Strs::Set(set) if set.is_empty() => {}
            Strs::Set(set) => {
                m.insert("str".into(), json!(set));
            }
            Strs::Top => {
                m.insert("str".into(), json!("top"));
            }
        }
        if self.tt || self.ff {
            let mut bs = Vec::new();
            if self.ff {
                bs.push(false);
            }
            if self.tt {
                bs.push(true);
            }
            m.insert("bool".into(), json!(bs));
        }
        if self.undef {
            m.insert("undef".into(), json!(true));
        }
        Json::Object(m)
    }

    pub fn from_json(j: &Json, domain: Domain) -> Result<Prims, DomainError> {
        let bad = |m: String| DomainError::Json(m);
        let obj = j
            .as_object()
            .ok_or_else(|| bad(format!("expected an object, found {j}")))?;
        let mut out = Prims::bottom(domain);
        for (key, v) in obj {
            match key.as_str() {
                "sign" => {
                    if domain != Domain::Sign {
                        return Err(DomainError::DomainMismatch {
                            left: domain,
                            right: Domain::Sign,
                        });
                    }
                    let arr = v.as_array().ok_or_else(|| bad("`sign` must be a list".into()))?;
                    let mut s = SignSet::EMPTY;
                    for x in arr {
                        let g = x
                            .as_str()
                            .and_then(Sign::from_symbol)
                            .ok_or_else(|| bad(format!("bad sign {x}")))?;
                        s.insert(g);
                    }
                    out.ints = Ints::Signs(s);
                }
                "ints" => {
                    if v.as_str() == Some("top") {
                        out.ints = match domain {
                            Domain::Sign => Ints::Signs(SignSet::ALL),
                            Domain::KSet(_) => Ints::Top,
                        };
                        continue;
                    }
                    let arr = v
                        .as_array()
                        .ok_or_else(|| bad("`ints` must be a list or \"top\"".into()))?;
                    for x in arr {
                        let n = x.as_i64().ok_or_else(|| bad(format!("bad integer {x}")))?;
                        out.add(&Primitive::Int(n));
                    }
                }
                "str" => {
                    if v.as_str() == Some("top") {
                        out.strs = Strs::Top;
                        continue;
                    }
                    let arr = v
                        .as_array()
                        .ok_or_else(|| bad("`str` must be a list or \"top\"".into()))?;
                    for x in arr {
                        let s = x.as_str().ok_or_else(|| bad(format!("bad string {x}")))?;
                        out.add(&Primitive::Str(s.to_string()));
                    }
                }
                "bool" => {
                    let arr = v.as_array().ok_or_else(|| bad("`bool` must be a list".into()))?;
                    for x in arr {
                        let b = x.as_bool().ok_or_else(|| bad(format!("bad boolean {x}")))?;
                        out.add(&Primitive::Bool(b));
                    }
                }
                "undef" => {
                    if v.as_bool().ok_or_else(|| bad("`undef` must be a boolean".into()))? {
                        out.undef = true;
                    }
                }
                other => return Err(bad(format!("unknown primitive component `{other}`"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Prims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match &self.ints {
            Ints::Signs(s) if !s.is_empty() => parts.extend(s.iter().map(|g| g.symbol().to_string())),
            Ints::Set(set) => parts.extend(set.iter().map(|n| n.to_string())),
            Ints::Top => parts.push("int:top".into()),
            _ => {}
        }
        match &self.strs {
            Strs::Set(set) => parts.extend(set.iter().map(|s| format!("{s:?}"))),
            Strs::Top => parts.push("str:top".into()),
        }
        if self.ff {
            parts.push("false".into());
        }
        if self.tt {
            parts.push("true".into());
        }
        if self.undef {
            parts.push("undef".into());
        }
        write!(f, "{{{}}}", parts.join(","))
    }
}

// ---- element-wise operator helpers ----

pub(crate) enum Arith {
    Add,
    Sub,
    Mul,
}

impl Ints {
    pub(crate) fn is_empty(&self) -> bool {
        match self {
            Ints::Signs(s) => s.is_empty(),
            Ints::Set(s) => s.is_empty(),
            Ints::Top => false,
        }
    }

    pub(crate) fn neg(&self) -> Ints {
        match self {
            Ints::Signs(s) => Ints::Signs(SignSet(s.iter().map(|g| sign_neg(g).bit()).fold(0, |a, b| a | b))),
            Ints::Set(set) => Ints::Set(set.iter().filter_map(|n| n.checked_neg()).collect()),
            Ints::Top => Ints::Top,
        }
    }

    pub(crate) fn arith(&self, op: Arith, o: &Ints) -> Ints {
        if self.is_empty() || o.is_empty() {
            return match self {
                Ints::Signs(_) => Ints::Signs(SignSet::EMPTY),
                _ => Ints::Set(BTreeSet::new()),
            };
        }
        match (self, o) {
            (Ints::Signs(a), Ints::Signs(b)) => {
                let mut out = SignSet::EMPTY;
                for x in a.iter() {
                    for y in b.iter() {
                        out = out.union(match op {
                            Arith::Add => sign_add(x, y),
                            Arith::Sub => sign_add(x, sign_neg(y)),
                            Arith::Mul => SignSet::of(&[sign_mul(x, y)]),
                        });
                    }
                }
                Ints::Signs(out)
            }
            (Ints::Set(a), Ints::Set(b)) => {
                let mut out = BTreeSet::new();
                for x in a {
                    for y in b {
                        let r = match op {
                            Arith::Add => x.checked_add(*y),
                            Arith::Sub => x.checked_sub(*y),
                            Arith::Mul => x.checked_mul(*y),
                        };
                        if let Some(r) = r {
                            out.insert(r);
                        }
                    }
                }
                Ints::Set(out)
            }
            _ => Ints::Top,
        }
    }

    /// Possible outcomes of `self op o`.
    pub(crate) fn compare(&self, op: Cmp, o: &Ints) -> (bool, bool) {
        if self.is_empty() || o.is_empty() {
            return (false, false);
        }
        match (self, o) {
            (Ints::Signs(a), Ints::Signs(b)) => {
                let (mut t, mut f) = (false, false);
                for x in a.iter() {
                    for y in b.iter() {
                        let (xt, xf) = sign_cmp(op, x, y);
                        t |= xt;
                        f |= xf;
                    }
                }
                (t, f)
            }
            (Ints::Set(a), Ints::Set(b)) => {
                let (mut t, mut f) = (false, false);
                for x in a {
                    for y in b {
                        if op.holds(*x as i128, *y as i128) {
                            t = true;
                        } else {
                            f = true;
                        }
                    }
                }
                (t, f)
            }
            _ => (true, true),
        }
    }

    /// The part of `self` whose comparison against the constant `c` can
    /// evaluate to `outcome`.
    pub(crate) fn filter(&self, op: Cmp, c: i64, outcome: bool) -> Ints {
        match self {
            Ints::Signs(s) => {
                let mut out = SignSet::EMPTY;
                for g in s.iter() {
                    let (t, f) = sign_vs_const(op, g, c);
                    if (outcome && t) || (!outcome && f) {
                        out.insert(g);
                    }
                }
                Ints::Signs(out)
            }
            Ints::Set(set) => Ints::Set(
                set.iter()
                    .copied()
                    .filter(|n| op.holds(*n as i128, c as i128) == outcome)
                    .collect(),
            ),
            Ints::Top => Ints::Top,
        }
    }
}

/// Possible outcomes of `n op c` for `n` ranging over sign `g`.
fn sign_vs_const(op: Cmp, g: Sign, c: i64) -> (bool, bool) {
    const INF: i128 = 1 << 80;
    let (lo, hi) = g.interval();
    let (lo, hi) = (lo.unwrap_or(-INF), hi.unwrap_or(INF));
    let c = c as i128;
    // The monotone comparisons are decided at the interval ends; equality
    // needs membership.
    match op {
        Cmp::Eq => {
            let t = lo <= c && c <= hi;
            (t, !(lo == hi && lo == c))
        }
        _ => {
            let mut t = false;
            let mut f = false;
            for n in [lo, hi, c - 1, c, c + 1] {
                if n < lo || n > hi {
                    continue;
                }
                if op.holds(n, c) {
                    t = true;
                } else {
                    f = true;
                }
            }
            (t, f)
        }
    }
}

pub(crate) fn concat_strs(a: &Strs, b: &Strs, k: usize) -> Strs {
    if a.is_empty() || b.is_empty() {
        return Strs::empty();
    }
    match (a, b) {
        (Strs::Set(x), Strs::Set(y)) => {
            let mut out = BTreeSet::new();
            for s in x {
                for t in y {
                    out.insert(format!("{s}{t}"));
                }
            }
            Strs::capped(out, k)
        }
        _ => Strs::Top,
    }
}

pub(crate) fn num2str(ints: &Ints, k: usize) -> Strs {
    match ints {
        Ints::Signs(s) if s.is_empty() => Strs::empty(),
        Ints::Signs(s) if *s == SignSet::of(&[Sign::Zero]) => {
            Strs::Set(BTreeSet::from(["0".to_string()]))
        }
        Ints::Signs(_) => Strs::Top,
        Ints::Set(set) => Strs::capped(set.iter().map(|n| n.to_string()).collect(), k),
        Ints::Top => Strs::Top,
    }
}

pub(crate) fn str_set(items: &[&str]) -> Strs {
    Strs::Set(items.iter().map(|s| s.to_string()).collect())
}

pub(crate) fn prims_with_strs(mut p: Prims, s: Strs) -> Prims {
    p.strs = s;
    p
}

pub(crate) fn prims_with_bools(mut p: Prims, tt: bool, ff: bool) -> Prims {
    p.tt = tt;
    p.ff = ff;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signs(s: &[Sign]) -> Ints {
        Ints::Signs(SignSet::of(s))
    }

    #[test]
    fn sign_addition_uses_intervals() {
        use Sign::*;
        assert_eq!(signs(&[Neg]).arith(Arith::Add, &signs(&[Zero])), signs(&[Neg]));
        assert_eq!(signs(&[Pos]).arith(Arith::Add, &signs(&[Pos])), signs(&[Pos]));
        assert_eq!(
            signs(&[Neg]).arith(Arith::Add, &signs(&[Pos])),
            signs(&[Neg, Zero, Pos])
        );
        assert_eq!(signs(&[Pos]).arith(Arith::Sub, &signs(&[Neg])), signs(&[Pos]));
        assert_eq!(signs(&[Neg]).arith(Arith::Mul, &signs(&[Neg])), signs(&[Pos]));
    }

    #[test]
    fn sign_comparisons() {
        use Sign::*;
        assert_eq!(signs(&[Neg]).compare(Cmp::Ge, &signs(&[Zero])), (false, true));
        assert_eq!(signs(&[Zero, Pos]).compare(Cmp::Ge, &signs(&[Zero])), (true, false));
        assert_eq!(signs(&[Zero]).compare(Cmp::Eq, &signs(&[Zero])), (true, false));
        assert_eq!(signs(&[Pos]).compare(Cmp::Eq, &signs(&[Pos])), (true, true));
        assert_eq!(signs(&[Pos]).compare(Cmp::Lt, &signs(&[Neg])), (false, true));
    }

    #[test]
    fn sign_filters_against_constants() {
        use Sign::*;
        let all = signs(&[Neg, Zero, Pos]);
        assert_eq!(all.filter(Cmp::Ge, 0, true), signs(&[Zero, Pos]));
        assert_eq!(all.filter(Cmp::Ge, 0, false), signs(&[Neg]));
        assert_eq!(all.filter(Cmp::Gt, 3, true), signs(&[Pos]));
        assert_eq!(all.filter(Cmp::Gt, 3, false), signs(&[Neg, Zero, Pos]));
        assert_eq!(all.filter(Cmp::Eq, -2, true), signs(&[Neg]));
        assert_eq!(all.filter(Cmp::Lt, -1, false), signs(&[Neg, Zero, Pos]));
        assert_eq!(all.filter(Cmp::Lt, 1, true), signs(&[Neg, Zero]));
    }

    #[test]
    fn kset_caps_to_top() {
        let d = Domain::KSet(2);
        let p = Prims::of_ints(d, [1, 2]);
        assert_eq!(p.ints(), &Ints::Set(BTreeSet::from([1, 2])));
        let q = p.join(&Prims::of_ints(d, [3]));
        assert_eq!(q.ints(), &Ints::Top);
    }

    #[test]
    fn json_round_trip() {
        let mut p = Prims::of_signs(SignSet::of(&[Sign::Neg, Sign::Pos]));
        p.add(&Primitive::Str("a".into()));
        p.add(&Primitive::Bool(true));
        p.add(&Primitive::Undef);
        assert_eq!(Prims::from_json(&p.to_json(), Domain::Sign).unwrap(), p);
        assert!(matches!(
            Prims::from_json(&p.to_json(), Domain::KSet(4)),
            Err(DomainError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn singletons() {
        assert_eq!(
            Prims::of_signs(SignSet::of(&[Sign::Zero])).singleton(),
            Some(Primitive::Int(0))
        );
        assert_eq!(Prims::of_signs(SignSet::of(&[Sign::Pos])).singleton(), None);
        assert_eq!(
            Prims::of_ints(Domain::KSet(4), [7]).singleton(),
            Some(Primitive::Int(7))
        );
        assert_eq!(Prims::bottom(Domain::Sign).singleton(), None);
    }
}
