//! Reading initial values: either inline JSON or a path to a JSON file,
//! mapping each top-level variable to a value.

use std::fs;

use serde_json::{Map, Value as Json};

use dynshort::concrete::Value;
use dynshort::domain::{AbsLoc, AbsValue, Domain, Singleton};
use dynshort::interp::{entry_views, ViewMap};
use dynshort::lang::Program;

use crate::Failure;

fn load(source: Option<&str>) -> Result<Map<String, Json>, Failure> {
    let Some(source) = source else {
        return Ok(Map::new());
    };
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        fs::read_to_string(source).map_err(|e| Failure::Config(format!("{source}: {e}")))?
    };
    match serde_json::from_str(&text) {
        Ok(Json::Object(m)) => Ok(m),
        Ok(other) => Err(Failure::Config(format!("inputs must be a JSON object, found {other}"))),
        Err(e) => Err(Failure::Config(format!("inputs: {e}"))),
    }
}

/// Concrete inputs: JSON scalars, or abstract values denoting exactly one
/// primitive.
pub fn concrete(source: Option<&str>) -> Result<Vec<(String, Value)>, Failure> {
    let mut out = Vec::new();
    for (x, j) in load(source)? {
        // Integer sets are exact in the k-set domain, so a singleton there
        // is one concrete primitive.
        let v = AbsValue::from_json(&j, Domain::KSet(Domain::DEFAULT_K))
            .map_err(|e| Failure::Config(format!("input {x}: {e}")))?;
        match v.singleton() {
            Some(Singleton::Prim(p)) => out.push((x, Value::Prim(p))),
            _ => return Err(Failure::Config(format!("input {x} is not a single concrete value: {j}"))),
        }
    }
    Ok(out)
}

pub fn abstract_views(program: &Program, source: Option<&str>, domain: Domain) -> Result<ViewMap, Failure> {
    let mut vars = Vec::new();
    for (x, j) in load(source)? {
        let v = AbsValue::from_json(&j, domain).map_err(|e| Failure::Config(format!("input {x}: {e}")))?;
        // A bottom binding would describe no state at all.
        if v.is_bottom() {
            return Err(Failure::Config(format!("input {x} is empty")));
        }
        vars.push((x, v));
    }
    Ok(entry_views(program, vars))
}

/// The inverse of [`abstract_views`] for generated entry views.
pub fn views_to_inputs(program: &Program, views: &ViewMap) -> Json {
    let mut m = Map::new();
    if let Some(s) = views.get(&program.entry()) {
        for (loc, v) in &s.memory {
            if let AbsLoc::Var(_, x) = loc {
                m.insert(x.clone(), v.prims.to_json());
            }
        }
    }
    Json::Object(m)
}
