//! Artifact document types, their schemas and the extraction and
//! validation operations that turn tabular data into metadata.

mod artifacts;
mod features;
mod params;
mod schema;
mod table;

pub use artifacts::{
    Artifact, ArtifactKind, CommonHeader, Dataset, DatasetParameters, DatasetTarget, Environment,
    Link, Pipeline, PipelineParameters, PipelineStep, Run, RunKind, RunStatus, SplitMethod,
    StepRole, TrainedPipeline,
};
pub use features::{extract_meta_features, MetaFeatures, FIXED_FEATURE_NAMES};
pub use params::{check_param_values, ParamSpec, ParamType, ParamValue};
pub use schema::{infer_data_schema, validate_rows, Constraint, DataSchema, SchemaEntry};
pub use table::{Cell, Column, ColumnKind, Table};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Outcome of a validation pass. `ok` holds exactly when `violations` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self {
            ok: true,
            violations: Vec::new(),
        }
    }

    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
        self.ok = false;
    }

    pub fn merge(&mut self, other: ValidationReport) {
        for v in other.violations {
            self.push(v.path, v.message);
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        for v in &mut self.violations {
            v.path = format!("{prefix}.{}", v.path);
        }
        self
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(crate::Error::Validation(self))
        }
    }
}

impl Default for ValidationReport {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.path, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}
