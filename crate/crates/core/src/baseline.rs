//! Central-tendency seeding, per-cell statistics for imputed records, and the
//! classical comparison imputers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, MissingMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CentralTendency {
    #[default]
    Mean,
    Median,
    Mode,
}

impl CentralTendency {
    /// `None` on an empty slice.
    pub fn of(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            CentralTendency::Mean => mean(values),
            CentralTendency::Median => median(values),
            CentralTendency::Mode => mode(values),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CentralTendency::Mean => "mean",
            CentralTendency::Median => "median",
            CentralTendency::Mode => "mode",
        }
    }
}

impl std::str::FromStr for CentralTendency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CentralTendency::Mean),
            "median" => Ok(CentralTendency::Median),
            "mode" => Ok(CentralTendency::Mode),
            other => Err(Error::Config(format!("invalid method {other:?}"))),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn median(v: &[f64]) -> f64 {
    let s = sorted(v);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Most frequent exact value; ties go to the smallest value.
fn mode(v: &[f64]) -> f64 {
    let s = sorted(v);
    let (mut best, mut best_count) = (s[0], 0usize);
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        if j - i > best_count {
            best = s[i];
            best_count = j - i;
        }
        i = j;
    }
    best
}

/// Sample standard deviation with the n-1 denominator; 0 for fewer than two
/// values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn nonzero_values(d: &Dataset, col: usize) -> Vec<f64> {
    d.values()
        .column(col)
        .iter()
        .copied()
        .filter(|&v| v != 0.0)
        .collect()
}

/// Replaces masked cells by the column's central tendency over observed
/// nonzero values. Idempotent under the same mask.
pub fn impute_central(d: &Dataset, mask: &MissingMask, m: CentralTendency) -> Result<Dataset> {
    let mut values = d.values().clone();
    for (&col, name) in mask.impute_indices().iter().zip(mask.impute_columns()) {
        let observed: Vec<f64> = d
            .values()
            .column(col)
            .iter()
            .enumerate()
            .filter(|&(r, &v)| v != 0.0 && !mask.is_missing(r, col))
            .map(|(_, &v)| v)
            .collect();
        let center = m
            .of(&observed)
            .ok_or_else(|| Error::CannotEstimateCenter(name.clone()))?;
        for r in 0..d.n_rows() {
            if mask.is_missing(r, col) {
                values[[r, col]] = center;
            }
        }
    }
    d.with_values(values)
}

/// Which original values feed the center and spread of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatsBasis {
    /// Nonzero original values only.
    #[default]
    Nonzero,
    /// Every original value, zeros included.
    AllValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub col_index: usize,
    pub center: f64,
    pub sd: f64,
}

impl ColumnStats {
    pub fn lower(&self) -> f64 {
        self.center - 2.0 * self.sd
    }

    pub fn upper(&self) -> f64 {
        self.center + 2.0 * self.sd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub row_id: u64,
    pub column: String,
    pub center: f64,
    pub upper: f64,
    pub lower: f64,
}

/// One record per masked cell with its center and ±2σ bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationStats {
    records: Vec<StatsRecord>,
    index: HashMap<(u64, usize), usize>,
    columns: Vec<(String, ColumnStats)>,
}

impl ImputationStats {
    pub fn records(&self) -> &[StatsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record for a masked cell, by row id and dataset column index.
    pub fn lookup(&self, row_id: u64, col: usize) -> Option<&StatsRecord> {
        self.index.get(&(row_id, col)).map(|&i| &self.records[i])
    }

    /// Column-level center and spread for every impute column.
    pub fn columns(&self) -> &[(String, ColumnStats)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(out, "row_id,column,center,upper,lower").map_err(io_err)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.row_id, r.column, r.center, r.upper, r.lower
            )
            .map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

pub fn compute_stats(
    d_imputed: &Dataset,
    d_original: &Dataset,
    mask: &MissingMask,
    m: CentralTendency,
) -> Result<ImputationStats> {
    compute_stats_with(d_imputed, d_original, mask, m, StatsBasis::Nonzero)
}

pub fn compute_stats_with(
    d_imputed: &Dataset,
    d_original: &Dataset,
    mask: &MissingMask,
    m: CentralTendency,
    basis: StatsBasis,
) -> Result<ImputationStats> {
    if d_imputed.values().dim() != d_original.values().dim()
        || d_original.values().dim() != mask.entries().dim()
    {
        return Err(Error::Shape(
            "imputed, original and mask shapes differ".to_string(),
        ));
    }
    let mut columns = Vec::with_capacity(mask.impute_indices().len());
    for (&col, name) in mask.impute_indices().iter().zip(mask.impute_columns()) {
        let values = match basis {
            StatsBasis::Nonzero => nonzero_values(d_original, col),
            StatsBasis::AllValues => d_original.values().column(col).to_vec(),
        };
        let center = m
            .of(&values)
            .filter(|_| values.iter().any(|&v| v != 0.0))
            .ok_or_else(|| Error::CannotEstimateCenter(name.clone()))?;
        columns.push((
            name.clone(),
            ColumnStats {
                col_index: col,
                center,
                sd: sample_sd(&values),
            },
        ));
    }

    let mut records = Vec::with_capacity(mask.total());
    let mut index = HashMap::with_capacity(mask.total());
    for (r, &row_id) in d_original.ids().iter().enumerate() {
        for (name, cs) in &columns {
            if mask.is_missing(r, cs.col_index) {
                index.insert((row_id, cs.col_index), records.len());
                records.push(StatsRecord {
                    row_id,
                    column: name.clone(),
                    center: cs.center,
                    upper: cs.upper(),
                    lower: cs.lower(),
                });
            }
        }
    }
    Ok(ImputationStats {
        records,
        index,
        columns,
    })
}

/// k-nearest-neighbour imputation.
///
/// Distances are Euclidean over z-scored feature columns (observed-value
/// statistics), skipping coordinates missing in either row and rescaling by
/// `total / present`. Donors for a cell are rows where that column is
/// observed; equal distances go to the lower row id.
pub fn impute_knn(d: &Dataset, mask: &MissingMask, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".to_string()));
    }
    let features: Vec<usize> = d
        .feature_names()
        .iter()
        .map(|n| d.column_index(n))
        .collect::<Result<_>>()?;
    let n = d.n_rows();

    let mut z = d.values().clone();
    for &c in &features {
        let obs: Vec<f64> = (0..n)
            .filter(|&r| !mask.is_missing(r, c))
            .map(|r| d.get(r, c))
            .collect();
        let mu = if obs.is_empty() { 0.0 } else { mean(&obs) };
        let sd = sample_sd(&obs);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for r in 0..n {
            z[[r, c]] = (d.get(r, c) - mu) / sd;
        }
    }

    let distance = |a: usize, b: usize| -> f64 {
        let mut sum = 0.0;
        let mut present = 0usize;
        for &c in &features {
            if mask.is_missing(a, c) || mask.is_missing(b, c) {
                continue;
            }
            sum += (z[[a, c]] - z[[b, c]]).powi(2);
            present += 1;
        }
        if present == 0 {
            f64::INFINITY
        } else {
            (sum * features.len() as f64 / present as f64).sqrt()
        }
    };

    let mut values = d.values().clone();
    for &c in mask.impute_indices() {
        let donors: Vec<usize> = (0..n).filter(|&r| !mask.is_missing(r, c)).collect();
        let targets: Vec<usize> = (0..n).filter(|&r| mask.is_missing(r, c)).collect();
        if targets.is_empty() {
            continue;
        }
        if k > donors.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds the {} observed rows of column {:?}",
                donors.len(),
                d.column_names()[c]
            )));
        }
        for &r in &targets {
            let mut ranked: Vec<(f64, u64, usize)> = donors
                .iter()
                .map(|&o| (distance(r, o), d.ids()[o], o))
                .collect();
            let by_distance_then_id = |a: &(f64, u64, usize), b: &(f64, u64, usize)| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            };
            if k < ranked.len() {
                ranked.select_nth_unstable_by(k - 1, by_distance_then_id);
                ranked.truncate(k);
            }
            values[[r, c]] = ranked.iter().map(|&(_, _, o)| d.get(o, c)).sum::<f64>() / k as f64;
        }
    }
    d.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::derive_mask;
    use ndarray::array;

    fn ds(cols: &[&str], values: ndarray::Array2<f64>) -> Dataset {
        Dataset::new(cols.iter().map(|s| s.to_string()).collect(), values, None).unwrap()
    }

    #[test]
    fn measures() {
        assert_eq!(CentralTendency::Mean.of(&[1.0, 2.0, 6.0]), Some(3.0));
        assert_eq!(CentralTendency::Median.of(&[10.0, 20.0]), Some(15.0));
        assert_eq!(CentralTendency::Median.of(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(
            CentralTendency::Mode.of(&[2.0, 1.0, 2.0, 1.0, 3.0]),
            Some(1.0)
        );
        assert_eq!(CentralTendency::Mode.of(&[5.0, 5.0, 1.0]), Some(5.0));
        assert_eq!(CentralTendency::Mean.of(&[]), None);
        assert!("bogus".parse::<CentralTendency>().is_err());
    }

    #[test]
    fn median_seed_example() {
        let d = ds(&["x"], array![[0.0], [10.0], [20.0]]);
        let mask = derive_mask(&d, &["x".into()]).unwrap();
        let out = impute_central(&d, &mask, CentralTendency::Median).unwrap();
        assert_eq!(out.values().column(0).to_vec(), vec![15.0, 10.0, 20.0]);
    }

    #[test]
    fn unmasked_column_unchanged_and_all_zero_errors() {
        let d = ds(&["x", "y"], array![[1.0, 0.0], [2.0, 0.0]]);
        let mask = derive_mask(&d, &["x".into()]).unwrap();
        let out = impute_central(&d, &mask, CentralTendency::Mean).unwrap();
        assert_eq!(out, d);
        let mask = derive_mask(&d, &["y".into()]).unwrap();
        assert!(matches!(
            impute_central(&d, &mask, CentralTendency::Mean),
            Err(Error::CannotEstimateCenter(c)) if c == "y"
        ));
    }

    #[test]
    fn seeding_is_idempotent() {
        let d = ds(
            &["x", "y"],
            array![[0.0, 1.5], [3.0, 0.0], [4.0, 7.25], [0.0, 2.0], [9.0, 0.0]],
        );
        let mask = derive_mask(&d, &["x".into(), "y".into()]).unwrap();
        for m in [
            CentralTendency::Mean,
            CentralTendency::Median,
            CentralTendency::Mode,
        ] {
            let once = impute_central(&d, &mask, m).unwrap();
            let twice = impute_central(&once, &mask, m).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn constant_column_has_degenerate_bounds() {
        let d = ds(&["x"], array![[4.0], [0.0], [4.0]]);
        let mask = derive_mask(&d, &["x".into()]).unwrap();
        let seeded = impute_central(&d, &mask, CentralTendency::Mean).unwrap();
        let stats = compute_stats(&seeded, &d, &mask, CentralTendency::Mean).unwrap();
        let r = stats.lookup(1, 0).unwrap();
        assert_eq!((r.lower, r.center, r.upper), (4.0, 4.0, 4.0));
        assert_eq!(stats.len(), 1);
    }

    #[test]
    fn stats_bounds_use_nonzero_sample_sd() {
        let d = ds(&["x"], array![[0.0], [2.0], [4.0], [6.0]]);
        let mask = derive_mask(&d, &["x".into()]).unwrap();
        let seeded = impute_central(&d, &mask, CentralTendency::Mean).unwrap();
        let stats = compute_stats(&seeded, &d, &mask, CentralTendency::Mean).unwrap();
        let r = stats.lookup(0, 0).unwrap();
        assert_eq!(r.center, 4.0);
        assert!((r.upper - 8.0).abs() < 1e-12);
        assert!((r.lower - 0.0).abs() < 1e-12);
        assert!(stats.lookup(1, 0).is_none());

        let all = compute_stats_with(
            &seeded,
            &d,
            &mask,
            CentralTendency::Mean,
            StatsBasis::AllValues,
        )
        .unwrap();
        let r = all.lookup(0, 0).unwrap();
        assert_eq!(r.center, 3.0);
    }

    #[test]
    fn knn_copies_identical_twin() {
        let d = ds(
            &["a", "b", "ins"],
            array![
                [1.0, 5.0, 0.0],
                [1.0, 5.0, 80.0],
                [9.0, 1.0, 300.0],
                [7.0, 2.0, 250.0]
            ],
        );
        let mask = derive_mask(&d, &["ins".into()]).unwrap();
        let out = impute_knn(&d, &mask, 1).unwrap();
        assert_eq!(out.get(0, 2), 80.0);
    }

    #[test]
    fn knn_with_all_donors_is_observed_mean() {
        let d = ds(
            &["a", "ins"],
            array![[1.0, 0.0], [2.0, 10.0], [3.0, 20.0], [4.0, 60.0]],
        );
        let mask = derive_mask(&d, &["ins".into()]).unwrap();
        let out = impute_knn(&d, &mask, 3).unwrap();
        assert!((out.get(0, 1) - 30.0).abs() < 1e-12);
        assert!(impute_knn(&d, &mask, 4).is_err());
        assert!(impute_knn(&d, &mask, 0).is_err());
    }

    #[test]
    fn knn_ties_break_to_lower_id() {
        let d = ds(&["a", "ins"], array![[0.0, 0.0], [1.0, 10.0], [-1.0, 20.0]]);
        // Row 0 is equidistant from rows 1 and 2 in z-space of `a`.
        let mask = derive_mask(&d, &["ins".into()]).unwrap();
        let out = impute_knn(&d, &mask, 1).unwrap();
        assert_eq!(out.get(0, 1), 10.0);
    }

    #[test]
    fn stats_csv_has_one_line_per_record() {
        let d = ds(&["x"], array![[0.0], [2.0], [0.0], [6.0]]);
        let mask = derive_mask(&d, &["x".into()]).unwrap();
        let seeded = impute_central(&d, &mask, CentralTendency::Mean).unwrap();
        let stats = compute_stats(&seeded, &d, &mask, CentralTendency::Mean).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        stats.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("row_id,column,center,upper,lower\n0,x,4,"));
    }
}
