use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    /// Label used when the cell acts as a class or category value.
    pub fn label(&self) -> Option<String> {
        match self {
            Cell::Missing => None,
            Cell::Number(x) => Some(format_number(*x)),
            Cell::Text(s) => Some(s.clone()),
        }
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Cell>,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: Vec<Cell>) -> Self {
        Self {
            name: name.into(),
            kind,
            values,
        }
    }

    pub fn numeric(name: impl Into<String>, values: &[f64]) -> Self {
        Self::new(
            name,
            ColumnKind::Numeric,
            values.iter().map(|&v| Cell::Number(v)).collect(),
        )
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        Self::new(
            name,
            ColumnKind::Categorical,
            values
                .iter()
                .map(|v| Cell::Text(v.as_ref().to_string()))
                .collect(),
        )
    }
}

/// In-memory tabular dataset with an optional target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    columns: Vec<Column>,
    target_column: Option<String>,
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        target_column: Option<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate column name '{}'",
                    c.name
                )));
            }
        }
        if let Some(first) = columns.first() {
            let n = first.values.len();
            if let Some(bad) = columns.iter().find(|c| c.values.len() != n) {
                return Err(Error::invalid(format!(
                    "column '{}' has {} values, expected {n}",
                    bad.name,
                    bad.values.len()
                )));
            }
        }
        if let Some(t) = &target_column {
            if !seen.contains(t.as_str()) {
                return Err(Error::invalid(format!(
                    "target column '{t}' does not exist"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            target_column,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_column(&self) -> Option<&str> {
        self.target_column.as_deref()
    }

    pub fn target(&self) -> Option<&Column> {
        self.target_column.as_deref().and_then(|t| self.column(t))
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        let target = self.target_column.as_deref();
        self.columns
            .iter()
            .filter(move |c| Some(c.name.as_str()) != target)
    }

    /// Reorders rows; `order[i]` is the source row placed at position `i`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_rows() {
            return Err(Error::invalid("row permutation has wrong length"));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: order.iter().map(|&i| c.values[i].clone()).collect(),
            })
            .collect();
        Table::new(self.name.clone(), columns, self.target_column.clone())
    }

    /// Reads a headed CSV. Columns whose non-empty cells all parse as numbers
    /// become numeric; other columns become categorical, except columns with
    /// more than 20 rows where every value is distinct, which become text.
    /// Empty cells and `?`/`NA` are missing.
    pub fn from_csv_reader<R: Read>(
        name: impl Into<String>,
        reader: R,
        target_column: Option<String>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (i, col) in raw.iter_mut().enumerate() {
                let v = rec.get(i).unwrap_or("").trim();
                col.push(if v.is_empty() || v == "?" || v == "NA" {
                    None
                } else {
                    Some(v.to_string())
                });
            }
        }
        let columns = headers
            .into_iter()
            .zip(raw)
            .map(|(name, vals)| infer_column(name, vals))
            .collect();
        Table::new(name, columns, target_column)
    }
}

fn infer_column(name: String, vals: Vec<Option<String>>) -> Column {
    let numeric = vals
        .iter()
        .flatten()
        .all(|v| v.parse::<f64>().map(|x| x.is_finite()).unwrap_or(false));
    let present: Vec<&String> = vals.iter().flatten().collect();
    if numeric && !present.is_empty() {
        let values = vals
            .iter()
            .map(|v| match v {
                Some(s) => Cell::Number(s.parse().unwrap()),
                None => Cell::Missing,
            })
            .collect();
        return Column::new(name, ColumnKind::Numeric, values);
    }
    let distinct: HashSet<&String> = present.iter().copied().collect();
    let kind = if present.len() > 20 && distinct.len() == present.len() {
        ColumnKind::Text
    } else {
        ColumnKind::Categorical
    };
    let values = vals
        .into_iter()
        .map(|v| v.map_or(Cell::Missing, Cell::Text))
        .collect();
    Column::new(name, kind, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_columns() {
        let err = Table::new(
            "t",
            vec![
                Column::numeric("a", &[1.0, 2.0]),
                Column::numeric("b", &[1.0]),
            ],
            None,
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_unknown_target() {
        let err = Table::new("t", vec![Column::numeric("a", &[1.0])], Some("y".into()));
        assert!(err.is_err());
    }

    #[test]
    fn csv_inference() {
        let csv = "x,color,y\n1.5,red,a\n2,,b\n?,blue,a\n";
        let t = Table::from_csv_reader("t", csv.as_bytes(), Some("y".into())).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.column("x").unwrap().kind, ColumnKind::Numeric);
        assert_eq!(t.column("x").unwrap().values[2], Cell::Missing);
        assert_eq!(t.column("color").unwrap().kind, ColumnKind::Categorical);
        assert_eq!(t.feature_columns().count(), 2);
    }
}
