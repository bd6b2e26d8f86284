use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use super::{Cell, ColumnKind, Table, ValidationReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Observed or declared bounds; `None` when the column had no values.
    Numeric {
        min: Option<f64>,
        max: Option<f64>,
    },
    Categorical {
        options: Vec<String>,
    },
    Text,
}

impl Constraint {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Constraint::Numeric { .. } => ColumnKind::Numeric,
            Constraint::Categorical { .. } => ColumnKind::Categorical,
            Constraint::Text => ColumnKind::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaEntry {
    pub name: String,
    pub constraint: Constraint,
}

/// Per-feature schema of a dataset.
///
/// Serialized as a JSON Schema object describing one row, with properties in
/// column order and missing values admitted as `null`. The `x-lde-kind`
/// annotation keeps the categorical/text distinction across round trips.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSchema {
    pub entries: Vec<SchemaEntry>,
}

impl DataSchema {
    pub fn entry(&self, name: &str) -> Option<&SchemaEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                report.push(format!("properties.{}", e.name), "duplicate entry name");
            }
            match &e.constraint {
                Constraint::Numeric {
                    min: Some(lo),
                    max: Some(hi),
                } if lo > hi => {
                    report.push(format!("properties.{}", e.name), "minimum exceeds maximum");
                }
                Constraint::Categorical { options } if options.is_empty() => {
                    report.push(format!("properties.{}", e.name), "empty option list");
                }
                _ => {}
            }
        }
        report
    }

    pub fn to_json_schema(&self) -> Value {
        serde_json::to_value(self).expect("schema serializes")
    }
}

fn entry_to_json(e: &SchemaEntry) -> Value {
    match &e.constraint {
        Constraint::Numeric { min, max } => {
            let mut v = json!({ "type": ["number", "null"], "x-lde-kind": "numeric" });
            if let Some(lo) = min {
                v["minimum"] = json!(lo);
            }
            if let Some(hi) = max {
                v["maximum"] = json!(hi);
            }
            v
        }
        Constraint::Categorical { options } => {
            let mut opts: Vec<Value> = options.iter().map(|o| json!(o)).collect();
            opts.push(Value::Null);
            json!({ "enum": opts, "x-lde-kind": "categorical" })
        }
        Constraint::Text => json!({ "type": ["string", "null"], "x-lde-kind": "text" }),
    }
}

fn entry_from_json(name: &str, v: &Value) -> std::result::Result<SchemaEntry, String> {
    let kind = v.get("x-lde-kind").and_then(Value::as_str);
    let has_enum = v.get("enum").is_some();
    let type_names: Vec<&str> = match v.get("type") {
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(a)) => a.iter().filter_map(Value::as_str).collect(),
        _ => vec![],
    };
    let kind = match kind {
        Some("numeric") => ColumnKind::Numeric,
        Some("categorical") => ColumnKind::Categorical,
        Some("text") => ColumnKind::Text,
        Some(other) => return Err(format!("unknown x-lde-kind '{other}' for '{name}'")),
        None if has_enum => ColumnKind::Categorical,
        None if type_names.iter().any(|t| *t == "number" || *t == "integer") => ColumnKind::Numeric,
        None => ColumnKind::Text,
    };
    let constraint = match kind {
        ColumnKind::Numeric => Constraint::Numeric {
            min: v.get("minimum").and_then(Value::as_f64),
            max: v.get("maximum").and_then(Value::as_f64),
        },
        ColumnKind::Categorical => {
            let options = v
                .get("enum")
                .and_then(Value::as_array)
                .ok_or_else(|| format!("categorical property '{name}' lacks enum"))?
                .iter()
                .filter_map(|o| o.as_str().map(str::to_string))
                .collect();
            Constraint::Categorical { options }
        }
        ColumnKind::Text => Constraint::Text,
    };
    Ok(SchemaEntry {
        name: name.to_string(),
        constraint,
    })
}

struct Properties<'a>(&'a [SchemaEntry]);

impl Serialize for Properties<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for e in self.0 {
            map.serialize_entry(&e.name, &entry_to_json(e))?;
        }
        map.end()
    }
}

impl Serialize for DataSchema {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("type", "object")?;
        map.serialize_entry("properties", &Properties(&self.entries))?;
        map.serialize_entry("required", &Vec::<String>::new())?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for DataSchema {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            properties: IndexMap<String, Value>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let entries = raw
            .properties
            .iter()
            .map(|(name, v)| entry_from_json(name, v))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        Ok(DataSchema { entries })
    }
}

/// Builds a schema with one entry per column, in column order.
pub fn infer_data_schema(table: &Table) -> Result<DataSchema> {
    if table.columns().is_empty() {
        return Err(Error::invalid("table has no columns"));
    }
    let entries = table
        .columns()
        .iter()
        .map(|col| {
            let constraint = match col.kind {
                ColumnKind::Numeric => {
                    let nums = col.values.iter().filter_map(Cell::as_f64);
                    let (min, max) =
                        nums.fold((None, None), |(lo, hi): (Option<f64>, Option<f64>), x| {
                            (
                                Some(lo.map_or(x, |l| l.min(x))),
                                Some(hi.map_or(x, |h| h.max(x))),
                            )
                        });
                    Constraint::Numeric { min, max }
                }
                ColumnKind::Categorical => {
                    let options: BTreeSet<String> =
                        col.values.iter().filter_map(Cell::label).collect();
                    if options.is_empty() {
                        Constraint::Text
                    } else {
                        Constraint::Categorical {
                            options: options.into_iter().collect(),
                        }
                    }
                }
                ColumnKind::Text => Constraint::Text,
            };
            SchemaEntry {
                name: col.name.clone(),
                constraint,
            }
        })
        .collect();
    Ok(DataSchema { entries })
}

/// Checks every cell against its schema entry. Missing cells always pass.
pub fn validate_rows(table: &Table, schema: &DataSchema) -> ValidationReport {
    let mut report = ValidationReport::new();
    for entry in &schema.entries {
        if table.column(&entry.name).is_none() {
            report.push(
                format!("column.{}", entry.name),
                "schema entry has no matching table column",
            );
        }
    }
    for col in table.columns() {
        let Some(entry) = schema.entry(&col.name) else {
            report.push(
                format!("column.{}", col.name),
                "table column is not declared in schema",
            );
            continue;
        };
        for (row, cell) in col.values.iter().enumerate() {
            if let Some(msg) = check_cell(cell, &entry.constraint) {
                report.push(format!("row[{row}].{}", col.name), msg);
            }
        }
    }
    report
}

fn check_cell(cell: &Cell, constraint: &Constraint) -> Option<String> {
    match (cell, constraint) {
        (Cell::Missing, _) => None,
        (Cell::Number(x), Constraint::Numeric { min, max }) => {
            if !x.is_finite() {
                Some("non-finite number".into())
            } else if min.is_some_and(|lo| *x < lo) || max.is_some_and(|hi| *x > hi) {
                Some(format!(
                    "{x} outside [{}, {}]",
                    min.map_or("-inf".into(), |v| v.to_string()),
                    max.map_or("inf".into(), |v| v.to_string())
                ))
            } else {
                None
            }
        }
        (Cell::Text(s), Constraint::Numeric { .. }) => Some(format!("expected number, got '{s}'")),
        (_, Constraint::Categorical { options }) => {
            let label = cell.label().unwrap_or_default();
            if options.contains(&label) {
                None
            } else {
                Some(format!("'{label}' is not one of the declared options"))
            }
        }
        (Cell::Text(_), Constraint::Text) => None,
        (Cell::Number(_), Constraint::Text) => Some("expected string, got number".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::Column;

    fn fixture() -> Table {
        Table::new(
            "fixture",
            vec![
                Column::numeric("width", &[2.5, -1.0, 4.0, 0.0, 3.5]),
                Column::categorical("color", &["red", "blue", "red", "green", "blue"]),
                Column::new(
                    "note",
                    ColumnKind::Text,
                    ["a", "b", "c", "d", "e"]
                        .iter()
                        .map(|s| Cell::Text(s.to_string()))
                        .collect(),
                ),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn numeric_range_is_observed_extremes() {
        let t = Table::new("t", vec![Column::numeric("x", &[1.0, 2.0, 3.0])], None).unwrap();
        let s = infer_data_schema(&t).unwrap();
        assert_eq!(
            s.entries[0].constraint,
            Constraint::Numeric {
                min: Some(1.0),
                max: Some(3.0)
            }
        );
    }

    #[test]
    fn categorical_options_sorted_distinct() {
        let t = Table::new("t", vec![Column::categorical("c", &["b", "a", "b"])], None).unwrap();
        let s = infer_data_schema(&t).unwrap();
        assert_eq!(
            s.entries[0].constraint,
            Constraint::Categorical {
                options: vec!["a".into(), "b".into()]
            }
        );
    }

    #[test]
    fn mixed_table_matches_hand_built_schema() {
        let expected = DataSchema {
            entries: vec![
                SchemaEntry {
                    name: "width".into(),
                    constraint: Constraint::Numeric {
                        min: Some(-1.0),
                        max: Some(4.0),
                    },
                },
                SchemaEntry {
                    name: "color".into(),
                    constraint: Constraint::Categorical {
                        options: vec!["blue".into(), "green".into(), "red".into()],
                    },
                },
                SchemaEntry {
                    name: "note".into(),
                    constraint: Constraint::Text,
                },
            ],
        };
        assert_eq!(infer_data_schema(&fixture()).unwrap(), expected);
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = Table::new("t", vec![], None).unwrap();
        assert!(matches!(infer_data_schema(&t), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn self_validation_passes() {
        let t = fixture();
        let s = infer_data_schema(&t).unwrap();
        assert!(validate_rows(&t, &s).ok);
    }

    #[test]
    fn out_of_range_and_unknown_category() {
        let schema = DataSchema {
            entries: vec![
                SchemaEntry {
                    name: "x".into(),
                    constraint: Constraint::Numeric {
                        min: Some(0.0),
                        max: Some(1.0),
                    },
                },
                SchemaEntry {
                    name: "c".into(),
                    constraint: Constraint::Categorical {
                        options: vec!["a".into(), "b".into()],
                    },
                },
            ],
        };
        let t = Table::new(
            "t",
            vec![
                Column::numeric("x", &[0.5, 5.0]),
                Column::categorical("c", &["a", "c"]),
            ],
            None,
        )
        .unwrap();
        let r = validate_rows(&t, &schema);
        assert!(!r.ok);
        let paths: Vec<&str> = r.violations.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(paths, vec!["row[1].x", "row[1].c"]);
    }

    #[test]
    fn column_mismatch_reports_instead_of_failing() {
        let t = fixture();
        let mut s = infer_data_schema(&t).unwrap();
        s.entries[0].name = "height".into();
        let r = validate_rows(&t, &s);
        assert!(!r.ok);
        assert!(r.violations.iter().any(|v| v.path == "column.height"));
        assert!(r.violations.iter().any(|v| v.path == "column.width"));
    }

    #[test]
    fn json_schema_round_trip_keeps_order() {
        let s = infer_data_schema(&fixture()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.find("width").unwrap() < text.find("color").unwrap());
        let back: DataSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let v = s.to_json_schema();
        assert_eq!(v["type"], "object");
        assert_eq!(v["properties"]["width"]["maximum"], 4.0);
    }
}
