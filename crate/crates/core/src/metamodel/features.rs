use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, Table};
use crate::{Error, Result};

/// Names of the fixed meta-features, in the order used for distances.
pub const FIXED_FEATURE_NAMES: [&str; 10] = [
    "n_instances",
    "n_features",
    "n_numeric",
    "n_categorical",
    "n_classes",
    "class_entropy",
    "majority_class_ratio",
    "missing_fraction",
    "mean_feature_skewness",
    "mean_feature_kurtosis",
];

/// Scalar dataset descriptors. Fixed fields are optional because external
/// corpora often carry only a subset; `user` holds caller-defined extras,
/// which are not part of the default distance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatures {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_instances: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_features: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_numeric: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_categorical: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<u64>,
    /// Bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority_class_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_feature_skewness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_feature_kurtosis: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub user: BTreeMap<String, f64>,
}

impl MetaFeatures {
    /// The fixed features as a vector in `FIXED_FEATURE_NAMES` order.
    pub fn fixed_vector(&self) -> [Option<f64>; 10] {
        let c = |v: Option<u64>| v.map(|x| x as f64);
        [
            c(self.n_instances),
            c(self.n_features),
            c(self.n_numeric),
            c(self.n_categorical),
            c(self.n_classes),
            self.class_entropy,
            self.majority_class_ratio,
            self.missing_fraction,
            self.mean_feature_skewness,
            self.mean_feature_kurtosis,
        ]
    }

    /// Sets a feature by name. Unknown names go to the user map. Count
    /// features must be non-negative integers.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<Option<u64>> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(Some(v as u64))
            } else {
                Err(Error::invalid(format!(
                    "{name} must be a non-negative integer, got {v}"
                )))
            }
        };
        match name {
            "n_instances" => self.n_instances = count(value)?,
            "n_features" => self.n_features = count(value)?,
            "n_numeric" => self.n_numeric = count(value)?,
            "n_categorical" => self.n_categorical = count(value)?,
            "n_classes" => self.n_classes = count(value)?,
            "class_entropy" => self.class_entropy = Some(value),
            "majority_class_ratio" => self.majority_class_ratio = Some(value),
            "missing_fraction" => self.missing_fraction = Some(value),
            "mean_feature_skewness" => self.mean_feature_skewness = Some(value),
            "mean_feature_kurtosis" => self.mean_feature_kurtosis = Some(value),
            _ => {
                self.user.insert(name.to_string(), value);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> super::ValidationReport {
        let mut r = super::ValidationReport::new();
        if let (Some(total), Some(num), Some(cat)) =
            (self.n_features, self.n_numeric, self.n_categorical)
        {
            if num + cat > total {
                r.push("n_features", "n_numeric + n_categorical exceeds n_features");
            }
        }
        if let Some(m) = self.majority_class_ratio {
            if !(0.0..=1.0).contains(&m) {
                r.push("majority_class_ratio", "must lie in [0, 1]");
            }
        }
        if let Some(h) = self.class_entropy {
            if h < 0.0 || !h.is_finite() {
                r.push("class_entropy", "must be a non-negative number");
            }
        }
        if let Some(m) = self.missing_fraction {
            if !(0.0..=1.0).contains(&m) {
                r.push("missing_fraction", "must lie in [0, 1]");
            }
        }
        r
    }
}

pub fn extract_meta_features(table: &Table) -> Result<MetaFeatures> {
    if let Some(t) = table.target_column() {
        if table.column(t).is_none() {
            return Err(Error::invalid(format!("target column '{t}' not found")));
        }
    }
    let n_rows = table.n_rows();
    let features: Vec<_> = table.feature_columns().collect();
    let count_kind = |k: ColumnKind| features.iter().filter(|c| c.kind == k).count() as u64;

    let total_cells = n_rows * features.len();
    let missing = features
        .iter()
        .flat_map(|c| c.values.iter())
        .filter(|v| v.is_missing())
        .count();
    let missing_fraction = if total_cells == 0 {
        0.0
    } else {
        missing as f64 / total_cells as f64
    };

    let mut skews = Vec::new();
    let mut kurts = Vec::new();
    for col in features.iter().filter(|c| c.kind == ColumnKind::Numeric) {
        let xs: Vec<f64> = col.values.iter().filter_map(Cell::as_f64).collect();
        if let Some((s, k)) = shape_moments(&xs) {
            skews.push(s);
            kurts.push(k);
        }
    }

    let mut mf = MetaFeatures {
        n_instances: Some(n_rows as u64),
        n_features: Some(features.len() as u64),
        n_numeric: Some(count_kind(ColumnKind::Numeric)),
        n_categorical: Some(count_kind(ColumnKind::Categorical)),
        n_classes: Some(0),
        missing_fraction: Some(missing_fraction),
        mean_feature_skewness: mean(&skews),
        mean_feature_kurtosis: mean(&kurts),
        ..Default::default()
    };

    if let Some(target) = table.target() {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for label in target.values.iter().filter_map(Cell::label) {
            *counts.entry(label).or_default() += 1;
        }
        let labelled: usize = counts.values().sum();
        mf.n_classes = Some(counts.len() as u64);
        if labelled > 0 {
            let mut freqs: Vec<usize> = counts.values().copied().collect();
            freqs.sort_unstable();
            let entropy: f64 = freqs
                .iter()
                .map(|&c| {
                    let p = c as f64 / labelled as f64;
                    -p * p.log2()
                })
                .sum();
            mf.class_entropy = Some(entropy.max(0.0));
            mf.majority_class_ratio = Some(*freqs.last().unwrap() as f64 / labelled as f64);
        }
    }
    Ok(mf)
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Population skewness `m3 / m2^1.5` and excess kurtosis `m4 / m2^2 - 3`.
/// `None` for fewer than two values or zero variance.
fn shape_moments(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= f64::EPSILON * mu.abs().max(1.0) {
        return None;
    }
    Some((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::Column;

    fn balanced() -> Table {
        let labels: Vec<&str> = (0..10).map(|i| if i < 5 { "yes" } else { "no" }).collect();
        Table::new(
            "balanced",
            vec![
                Column::numeric("a", &(0..10).map(f64::from).collect::<Vec<_>>()),
                Column::numeric("b", &[1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0]),
                Column::categorical("c", &["x", "y", "x", "y", "x", "y", "x", "y", "x", "z"]),
                Column::categorical("y", &labels),
            ],
            Some("y".into()),
        )
        .unwrap()
    }

    #[test]
    fn balanced_binary() {
        let mf = extract_meta_features(&balanced()).unwrap();
        assert_eq!(mf.n_instances, Some(10));
        assert_eq!(mf.n_features, Some(3));
        assert_eq!(mf.n_numeric, Some(2));
        assert_eq!(mf.n_categorical, Some(1));
        assert_eq!(mf.n_classes, Some(2));
        assert_eq!(mf.class_entropy, Some(1.0));
        assert_eq!(mf.majority_class_ratio, Some(0.5));
        assert_eq!(mf.missing_fraction, Some(0.0));
        assert!(mf.validate().ok);
    }

    #[test]
    fn single_class_target() {
        let t = Table::new(
            "one",
            vec![
                Column::numeric("a", &[1.0, 2.0, 3.0]),
                Column::categorical("y", &["k", "k", "k"]),
            ],
            Some("y".into()),
        )
        .unwrap();
        let mf = extract_meta_features(&t).unwrap();
        assert_eq!(mf.class_entropy, Some(0.0));
        assert_eq!(mf.majority_class_ratio, Some(1.0));
        assert_eq!(mf.n_classes, Some(1));
    }

    #[test]
    fn no_target_leaves_class_fields_empty() {
        let t = Table::new("t", vec![Column::numeric("a", &[1.0, 2.0])], None).unwrap();
        let mf = extract_meta_features(&t).unwrap();
        assert_eq!(mf.n_classes, Some(0));
        assert_eq!(mf.class_entropy, None);
        assert_eq!(mf.majority_class_ratio, None);
    }

    #[test]
    fn missing_cells_counted_and_skipped_in_moments() {
        let t = Table::new(
            "t",
            vec![
                Column::new(
                    "a",
                    ColumnKind::Numeric,
                    vec![
                        Cell::Number(1.0),
                        Cell::Missing,
                        Cell::Number(2.0),
                        Cell::Number(9.0),
                    ],
                ),
                Column::categorical("b", &["u", "v", "u", "v"]),
            ],
            None,
        )
        .unwrap();
        let mf = extract_meta_features(&t).unwrap();
        assert_eq!(mf.missing_fraction, Some(1.0 / 8.0));
        let direct = shape_moments(&[1.0, 2.0, 9.0]).unwrap();
        assert_eq!(mf.mean_feature_skewness, Some(direct.0));
    }

    /// Skewness from raw power sums, independent of the central-moment loop.
    fn skew_from_power_sums(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let s1: f64 = xs.iter().sum::<f64>() / n;
        let s2: f64 = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let s3: f64 = xs.iter().map(|x| x * x * x).sum::<f64>() / n;
        let var = s2 - s1 * s1;
        let m3 = s3 - 3.0 * s1 * s2 + 2.0 * s1.powi(3);
        m3 / var.powf(1.5)
    }

    #[test]
    fn skewness_matches_power_sum_oracle() {
        let b = [1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0];
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let expected = (skew_from_power_sums(&a) + skew_from_power_sums(&b)) / 2.0;
        let mf = extract_meta_features(&balanced()).unwrap();
        assert!((mf.mean_feature_skewness.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn missing_target_is_error() {
        // Target names are checked at table construction, so bypass via serde.
        let json = r#"{"name":"t","columns":[{"name":"a","kind":"numeric","values":[1.0]}],"target_column":"y"}"#;
        let t: Table = serde_json::from_str(json).unwrap();
        assert!(matches!(
            extract_meta_features(&t),
            Err(Error::InvalidInput(_))
        ));
    }
}
