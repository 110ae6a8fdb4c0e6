use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Map, Value as Json};

use super::{AbsValue, Domain, DomainError};
use crate::lang::Label;

/// An abstract address: the top-level environment, or an allocation site
/// (an object's `r = {}` label or a function body label).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsAddr {
    Top,
    Site(Label),
}

impl fmt::Display for AbsAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsAddr::Top => f.write_str("top"),
            AbsAddr::Site(l) => write!(f, "{l}"),
        }
    }
}

impl AbsAddr {
    fn to_json(self) -> Json {
        match self {
            AbsAddr::Top => json!("top"),
            AbsAddr::Site(l) => json!(l.0),
        }
    }

    fn from_json(j: &Json) -> Result<AbsAddr, DomainError> {
        match j {
            Json::String(s) if s == "top" => Ok(AbsAddr::Top),
            Json::String(s) => s
                .parse::<u32>()
                .map(|n| AbsAddr::Site(Label(n)))
                .map_err(|_| DomainError::Json(format!("bad address {s:?}"))),
            Json::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(|n| AbsAddr::Site(Label(n)))
                .ok_or_else(|| DomainError::Json(format!("bad address {n}"))),
            _ => Err(DomainError::Json(format!("bad address {j}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsLoc {
    Var(AbsAddr, String),
    Prop(Label, String),
}

impl AbsLoc {
    pub fn var(name: impl Into<String>) -> AbsLoc {
        AbsLoc::Var(AbsAddr::Top, name.into())
    }

    /// The abstract address whose count decides strong updates.
    pub fn addr(&self) -> AbsAddr {
        match self {
            AbsLoc::Var(a, _) => *a,
            AbsLoc::Prop(site, _) => AbsAddr::Site(*site),
        }
    }

    /// Compact key: `x` (top level), `3.x` (frame of body 3),
    /// `5["k"]` (property of site 5).
    pub fn key(&self) -> String {
        match self {
            AbsLoc::Var(AbsAddr::Top, x) => x.clone(),
            AbsLoc::Var(AbsAddr::Site(l), x) => format!("{l}.{x}"),
            AbsLoc::Prop(l, k) => format!("{l}[{}]", Json::String(k.clone())),
        }
    }

    pub fn from_key(s: &str) -> Result<AbsLoc, DomainError> {
        let bad = || DomainError::Json(format!("bad location key {s:?}"));
        let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            return Ok(AbsLoc::Var(AbsAddr::Top, s.to_string()));
        }
        let site = Label(s[..digits].parse().map_err(|_| bad())?);
        let rest = &s[digits..];
        if let Some(x) = rest.strip_prefix('.') {
            return Ok(AbsLoc::Var(AbsAddr::Site(site), x.to_string()));
        }
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let key: String = serde_json::from_str(inner).map_err(|_| bad())?;
        Ok(AbsLoc::Prop(site, key))
    }
}

impl fmt::Display for AbsLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Abstract allocation count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Count {
    Zero,
    One,
    Many,
}

impl Count {
    pub fn succ(self) -> Count {
        match self {
            Count::Zero => Count::One,
            Count::One | Count::Many => Count::Many,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Count::Zero => "0",
            Count::One => "1",
            Count::Many => "2+",
        }
    }

    fn from_symbol(s: &str) -> Option<Count> {
        [Count::Zero, Count::One, Count::Many]
            .into_iter()
            .find(|c| c.symbol() == s)
    }
}

/// Counter; absent addresses have count zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AbsCounter(BTreeMap<AbsAddr, Count>);

impl AbsCounter {
    pub fn new() -> AbsCounter {
        AbsCounter::default()
    }

    /// The counter of an entry state: the top-level environment exists once.
    pub fn initial() -> AbsCounter {
        AbsCounter(BTreeMap::from([(AbsAddr::Top, Count::One)]))
    }

    pub fn get(&self, a: AbsAddr) -> Count {
        self.0.get(&a).copied().unwrap_or(Count::Zero)
    }

    pub fn set(&mut self, a: AbsAddr, c: Count) {
        if c == Count::Zero {
            self.0.remove(&a);
        } else {
            self.0.insert(a, c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (AbsAddr, Count)> + '_ {
        self.0.iter().map(|(a, c)| (*a, *c))
    }

    pub fn join(&self, o: &AbsCounter) -> AbsCounter {
        let mut out = self.clone();
        for (a, c) in o.iter() {
            let m = out.get(a).max(c);
            out.set(a, m);
        }
        out
    }

    pub fn leq(&self, o: &AbsCounter) -> bool {
        self.iter().all(|(a, c)| c <= o.get(a))
    }
}

/// `inc(n, a)`: bumps `a` along 0 → 1 → 2+ and leaves every other entry.
pub fn inc(counter: &AbsCounter, a: AbsAddr) -> AbsCounter {
    let mut out = counter.clone();
    out.set(a, counter.get(a).succ());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsFrame {
    pub ret_env: AbsAddr,
    pub ret_label: Label,
    pub targets: BTreeSet<AbsLoc>,
}

pub type AbsMemory = BTreeMap<AbsLoc, AbsValue>;
/// Keyed by the function body label of the callee environment.
pub type AbsContext = BTreeMap<Label, BTreeSet<AbsFrame>>;

/// Writes `value` to every target: overwrites when there is exactly one
/// target whose address has been allocated once, joins otherwise.
pub fn mem_update(
    memory: &mut AbsMemory,
    counter: &AbsCounter,
    targets: &BTreeSet<AbsLoc>,
    value: &AbsValue,
) {
    debug_assert!(!value.is_bottom(), "memories never store bottom");
    let strong = targets.len() == 1
        && targets
            .first()
            .is_some_and(|l| counter.get(l.addr()) == Count::One);
    for l in targets {
        match memory.get_mut(l) {
            Some(old) if !strong => old.join_in(value),
            _ => {
                memory.insert(l.clone(), value.clone());
            }
        }
    }
}

/// The abstract state held by one non-bottom view.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsState {
    pub memory: AbsMemory,
    pub context: AbsContext,
    pub env: AbsAddr,
    pub counter: AbsCounter,
}

impl AbsState {
    /// Top-level entry state with the given variables bound.
    pub fn entry(vars: impl IntoIterator<Item = (String, AbsValue)>) -> AbsState {
        AbsState {
            memory: vars
                .into_iter()
                .map(|(x, v)| (AbsLoc::var(x), v))
                .collect(),
            context: AbsContext::new(),
            env: AbsAddr::Top,
            counter: AbsCounter::initial(),
        }
    }

    pub fn var(&self, name: &str) -> Option<&AbsValue> {
        self.memory.get(&AbsLoc::Var(self.env, name.to_string()))
    }

    /// Joins `o` into `self`. On an environment mismatch `self.env` is
    /// kept, everything else is still joined, and the mismatch is returned.
    pub fn join_in(&mut self, o: &AbsState) -> Result<(), DomainError> {
        for (l, v) in &o.memory {
            match self.memory.get_mut(l) {
                Some(old) => *old = old.try_join(v)?,
                None => {
                    self.memory.insert(l.clone(), v.clone());
                }
            }
        }
        for (a, frames) in &o.context {
            self.context
                .entry(*a)
                .or_default()
                .extend(frames.iter().cloned());
        }
        self.counter = self.counter.join(&o.counter);
        if self.env != o.env {
            return Err(DomainError::EnvMismatch {
                left: self.env,
                right: o.env,
            });
        }
        Ok(())
    }

    /// Strict join: fails on environment or domain mismatch.
    pub fn try_join(&self, o: &AbsState) -> Result<AbsState, DomainError> {
        let mut out = self.clone();
        out.join_in(o)?;
        Ok(out)
    }

    pub fn leq(&self, o: &AbsState) -> bool {
        self.env == o.env
            && self.counter.leq(&o.counter)
            && self
                .memory
                .iter()
                .all(|(l, v)| o.memory.get(l).is_some_and(|w| v.leq(w)))
            && self.context.iter().all(|(a, fs)| {
                o.context
                    .get(a)
                    .is_some_and(|gs| fs.is_subset(gs))
            })
    }

    pub fn to_json(&self) -> Json {
        let memory: Map<String, Json> = self
            .memory
            .iter()
            .map(|(l, v)| (l.key(), v.to_json()))
            .collect();
        let context: Map<String, Json> = self
            .context
            .iter()
            .map(|(a, fs)| {
                let frames: Vec<Json> = fs
                    .iter()
                    .map(|f| {
                        json!({
                            "ret_env": f.ret_env.to_json(),
                            "ret_label": f.ret_label.0,
                            "targets": f.targets.iter().map(AbsLoc::key).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                (a.0.to_string(), Json::Array(frames))
            })
            .collect();
        let counter: Map<String, Json> = self
            .counter
            .iter()
            .map(|(a, c)| (a.to_string(), json!(c.symbol())))
            .collect();
        json!({
            "env": self.env.to_json(),
            "memory": memory,
            "context": context,
            "counter": counter,
        })
    }

    pub fn from_json(j: &Json, domain: Domain) -> Result<AbsState, DomainError> {
        let bad = |m: &str| DomainError::Json(m.to_string());
        let obj = j.as_object().ok_or_else(|| bad("state must be an object"))?;
        let env = AbsAddr::from_json(obj.get("env").ok_or_else(|| bad("state needs `env`"))?)?;
        let mut memory = AbsMemory::new();
        if let Some(m) = obj.get("memory") {
            for (k, v) in m.as_object().ok_or_else(|| bad("`memory` must be an object"))? {
                let v = AbsValue::from_json(v, domain)?;
                if !v.is_bottom() {
                    memory.insert(AbsLoc::from_key(k)?, v);
                }
            }
        }
        let mut context = AbsContext::new();
        if let Some(c) = obj.get("context") {
            for (k, fs) in c.as_object().ok_or_else(|| bad("`context` must be an object"))? {
                let site = Label(k.parse().map_err(|_| bad("bad context key"))?);
                let mut set = BTreeSet::new();
                for f in fs.as_array().ok_or_else(|| bad("context entries must be lists"))? {
                    let ret_env =
                        AbsAddr::from_json(f.get("ret_env").ok_or_else(|| bad("frame needs `ret_env`"))?)?;
                    let ret_label = f
                        .get("ret_label")
                        .and_then(Json::as_u64)
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| bad("frame needs `ret_label`"))?;
                    let mut targets = BTreeSet::new();
                    for t in f
                        .get("targets")
                        .and_then(Json::as_array)
                        .ok_or_else(|| bad("frame needs `targets`"))?
                    {
                        targets.insert(AbsLoc::from_key(
                            t.as_str().ok_or_else(|| bad("targets are strings"))?,
                        )?);
                    }
                    set.insert(AbsFrame {
                        ret_env,
                        ret_label: Label(ret_label),
                        targets,
                    });
                }
                context.insert(site, set);
            }
        }
        let mut counter = AbsCounter::new();
        if let Some(c) = obj.get("counter") {
            for (k, v) in c.as_object().ok_or_else(|| bad("`counter` must be an object"))? {
                let a = AbsAddr::from_json(&Json::String(k.clone()))?;
                let n = v
                    .as_str()
                    .and_then(Count::from_symbol)
                    .ok_or_else(|| bad("counts are \"0\", \"1\" or \"2+\""))?;
                counter.set(a, n);
            }
        }
        Ok(AbsState {
            memory,
            context,
            env,
            counter,
        })
    }
}
