use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Integer,
    Float,
    Boolean,
    Categorical,
    String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

/// One hyperparameter exposed by a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
}

impl ParamSpec {
    pub fn integer(name: &str, min: i64, max: i64) -> Self {
        Self {
            name: name.into(),
            kind: ParamType::Integer,
            min: Some(min as f64),
            max: Some(max as f64),
            options: vec![],
            default: None,
        }
    }

    pub fn float(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamType::Float,
            min: Some(min),
            max: Some(max),
            options: vec![],
            default: None,
        }
    }

    pub fn categorical(name: &str, options: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: ParamType::Categorical,
            min: None,
            max: None,
            options: options.iter().map(|s| s.to_string()).collect(),
            default: None,
        }
    }

    fn check(&self, value: &ParamValue) -> Option<String> {
        let numeric = match (self.kind, value) {
            (ParamType::Integer, ParamValue::Int(i)) => Some(*i as f64),
            (ParamType::Float, ParamValue::Int(i)) => Some(*i as f64),
            (ParamType::Float, ParamValue::Float(x)) => Some(*x),
            (ParamType::Boolean, ParamValue::Bool(_)) => None,
            (ParamType::String, ParamValue::Str(_)) => None,
            (ParamType::Categorical, ParamValue::Str(s)) => {
                return (!self.options.contains(s))
                    .then(|| format!("'{s}' is not one of {:?}", self.options));
            }
            (kind, v) => return Some(format!("type mismatch: expected {kind:?}, got {v}")),
        };
        let x = numeric?;
        if !x.is_finite() {
            return Some("non-finite value".into());
        }
        if self.min.is_some_and(|lo| x < lo) || self.max.is_some_and(|hi| x > hi) {
            return Some(format!(
                "{value} outside [{}, {}]",
                self.min.map_or("-inf".into(), |v| v.to_string()),
                self.max.map_or("inf".into(), |v| v.to_string())
            ));
        }
        None
    }
}

/// Validates the parameter schema itself: unique names and sane bounds.
pub(crate) fn validate_param_schema(schema: &[ParamSpec]) -> ValidationReport {
    let mut r = ValidationReport::new();
    let mut seen = BTreeSet::new();
    for (i, p) in schema.iter().enumerate() {
        if !seen.insert(p.name.as_str()) {
            r.push(
                format!("parameter_schema[{i}]"),
                format!("duplicate name '{}'", p.name),
            );
        }
        if let (Some(lo), Some(hi)) = (p.min, p.max) {
            if lo > hi {
                r.push(format!("parameter_schema[{i}]"), "min exceeds max");
            }
        }
        if p.kind == ParamType::Categorical && p.options.is_empty() {
            r.push(
                format!("parameter_schema[{i}]"),
                "categorical parameter without options",
            );
        }
    }
    r
}

/// Every key must be declared and satisfy its spec. Absent keys take defaults.
pub fn check_param_values(
    values: &BTreeMap<String, ParamValue>,
    schema: &[ParamSpec],
) -> ValidationReport {
    let mut r = ValidationReport::new();
    for (name, value) in values {
        match schema.iter().find(|p| &p.name == name) {
            None => r.push(format!("values.{name}"), "unknown parameter"),
            Some(spec) => {
                if let Some(msg) = spec.check(value) {
                    r.push(format!("values.{name}"), msg);
                }
            }
        }
    }
    r
}
