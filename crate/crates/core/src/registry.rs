//! Name-keyed registries of strategy factories.
//!
//! A registry maps a kebab-case name to a factory that builds a boxed trait
//! object from a JSON parameter map. Configuration files select a strategy
//! with `{"kind": "<name>", ...params}`.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub type Params = Map<String, Value>;
pub type Factory<T> = Box<dyn Fn(&Params) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    what: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(what: &'static str) -> Self {
        Self {
            what,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F) -> &mut Self
    where
        F: Fn(&Params) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.into(), Box::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<Box<T>> {
        let factory = self.entries.get(name).ok_or_else(|| {
            Error::config(format!(
                "unknown {} kind `{name}` (known: {})",
                self.what,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(params)
    }

    /// Builds from a `{"kind": name, ...}` object.
    pub fn build_tagged(&self, value: &Value) -> Result<Box<T>> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config(format!("{} must be a JSON object", self.what)))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::config(format!("{} is missing a string `kind`", self.what)))?;
        let mut params = obj.clone();
        params.remove("kind");
        self.build(kind, &params)
    }
}

/// Rejects keys outside `allowed`.
pub fn expect_keys(params: &Params, allowed: &[&str], ctx: &str) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::config(format!(
                "unknown parameter `{key}` for {ctx} (allowed: {})",
                if allowed.is_empty() {
                    "none".to_string()
                } else {
                    allowed.join(", ")
                }
            )));
        }
    }
    Ok(())
}

pub fn get_f64(params: &Params, key: &str, ctx: &str) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(format!("{ctx}.{key} must be a finite number"))),
        None => Err(Error::config(format!("{ctx} is missing `{key}`"))),
    }
}

pub fn get_f64_or(params: &Params, key: &str, default: f64, ctx: &str) -> Result<f64> {
    if params.contains_key(key) {
        get_f64(params, key, ctx)
    } else {
        Ok(default)
    }
}

pub fn get_u64_or(params: &Params, key: &str, default: u64, ctx: &str) -> Result<u64> {
    match params.get(key) {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::config(format!("{ctx}.{key} must be a non-negative integer"))),
        None => Ok(default),
    }
}
