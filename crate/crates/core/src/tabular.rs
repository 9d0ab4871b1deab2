//! Numeric tables, CSV persistence, and the zero-as-missing mask.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Name of the synthetic row identifier column.
pub const ID_COLUMN: &str = "id";

/// Column-labelled numeric table with a synthetic per-row id.
///
/// `values` never contains NaN or infinities. The id column is not part of
/// `values`; it is appended on save and dropped on load.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    column_names: Vec<String>,
    values: Array2<f64>,
    ids: Vec<u64>,
    target: Option<String>,
}

impl Dataset {
    pub fn new(
        column_names: Vec<String>,
        values: Array2<f64>,
        target: Option<String>,
    ) -> Result<Self> {
        if values.ncols() != column_names.len() {
            return Err(Error::Shape(format!(
                "{} column names for {} value columns",
                column_names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if name == ID_COLUMN || !seen.insert(name.as_str()) {
                return Err(Error::DuplicateHeader(name.clone()));
            }
        }
        if let Some(t) = &target {
            if !seen.contains(t.as_str()) {
                return Err(Error::UnknownColumn(t.clone()));
            }
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                row: r + 1,
                column: column_names[c].clone(),
                value: v.to_string(),
            });
        }
        let ids = (0..values.nrows() as u64).collect();
        Ok(Dataset {
            column_names,
            values,
            ids,
            target,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Columns other than the target.
    pub fn feature_names(&self) -> Vec<String> {
        self.column_names
            .iter()
            .filter(|c| Some(c.as_str()) != self.target())
            .cloned()
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        Ok(self.values.column(self.column_index(name)?))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    /// Same schema and ids, new values. Values must stay finite.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        if values.dim() != self.values.dim() {
            return Err(Error::Shape(format!(
                "expected {:?}, got {:?}",
                self.values.dim(),
                values.dim()
            )));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {v} at row {r}, column {}",
                self.column_names[c]
            )));
        }
        Ok(Dataset {
            column_names: self.column_names.clone(),
            values,
            ids: self.ids.clone(),
            target: self.target.clone(),
        })
    }
}

/// Reads a headed, comma-separated numeric table.
///
/// A column named `id` in the file is skipped; ids are always regenerated
/// from row order. Row numbers in errors count data rows from 1.
pub fn load_csv(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut names = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if !seen.insert(h.to_string()) {
            return Err(Error::DuplicateHeader(h.to_string()));
        }
        if h != ID_COLUMN {
            kept.push(i);
            names.push(h.to_string());
        }
    }
    if names.is_empty() {
        return Err(Error::NoRows(path.to_path_buf()));
    }

    let mut flat = Vec::new();
    let mut n_rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row: r + 1,
                found: record.len(),
                expected: headers.len(),
            });
        }
        for (&i, name) in kept.iter().zip(&names) {
            let raw = &record[i];
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: name.clone(),
                    value: raw.to_string(),
                });
            }
            flat.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::NoRows(path.to_path_buf()));
    }
    let values = Array2::from_shape_vec((n_rows, names.len()), flat)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(names, values, target_column.map(str::to_string))
}

/// Writes the table with `id` appended as the last column.
///
/// Values use Rust's shortest round-trip float formatting, so a reload is
/// exact.
pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = d.column_names.join(",");
    header.push(',');
    header.push_str(ID_COLUMN);
    writeln!(out, "{header}").map_err(io_err)?;
    for (row, id) in d.values.rows().into_iter().zip(&d.ids) {
        let mut line = String::with_capacity(16 * row.len());
        for v in row.iter() {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&id.to_string());
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Cells treated as missing: exact zeros in the designated columns.
///
/// Immutable once derived.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingMask {
    entries: Array2<bool>,
    impute_columns: Vec<String>,
    impute_indices: Vec<usize>,
}

impl MissingMask {
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.entries[[row, col]]
    }

    pub fn entries(&self) -> &Array2<bool> {
        &self.entries
    }

    pub fn impute_columns(&self) -> &[String] {
        &self.impute_columns
    }

    /// Column indices (into the dataset) of the impute columns.
    pub fn impute_indices(&self) -> &[usize] {
        &self.impute_indices
    }

    pub fn count_in_column(&self, col: usize) -> usize {
        self.entries.column(col).iter().filter(|&&m| m).count()
    }

    pub fn total(&self) -> usize {
        self.entries.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Masked (row, column) positions in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries
            .indexed_iter()
            .filter(|(_, &m)| m)
            .map(|((r, c), _)| (r, c))
    }
}

pub fn derive_mask(d: &Dataset, impute_columns: &[String]) -> Result<MissingMask> {
    let mut indices = Vec::with_capacity(impute_columns.len());
    for name in impute_columns {
        if name == ID_COLUMN || Some(name.as_str()) == d.target() {
            return Err(Error::NotImputable(name.clone()));
        }
        let idx = d.column_index(name)?;
        if indices.contains(&idx) {
            return Err(Error::DuplicateHeader(name.clone()));
        }
        indices.push(idx);
    }
    let mut entries = Array2::from_elem(d.values.dim(), false);
    for &c in &indices {
        for (r, &v) in d.values.column(c).iter().enumerate() {
            entries[[r, c]] = v == 0.0;
        }
    }
    Ok(MissingMask {
        entries,
        impute_columns: impute_columns.to_vec(),
        impute_indices: indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn small() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into(), "y".into()],
            array![[1.0, 0.0, 1.0], [0.0, 2.5, 0.0], [3.0, 4.0, 1.0]],
            Some("y".into()),
        )
        .unwrap()
    }

    #[test]
    fn empty_file_is_no_rows() {
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path(), None), Err(Error::NoRows(_))));
        let f = write_tmp("a,b\n");
        assert!(matches!(load_csv(f.path(), None), Err(Error::NoRows(_))));
    }

    #[test]
    fn text_cell_names_row_and_column() {
        let f = write_tmp("Glucose,BMI\n1,2\n1,2\n1,2\n1,2\n1,abc\n");
        match load_csv(f.path(), None) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 5);
                assert_eq!(column, "BMI");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_header_rejected() {
        let f = write_tmp("a,b,a\n1,2,3\n");
        assert!(matches!(
            load_csv(f.path(), None),
            Err(Error::DuplicateHeader(h)) if h == "a"
        ));
    }

    #[test]
    fn unknown_target_rejected() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), Some("Outcome")),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn ids_follow_row_order_and_file_id_is_ignored() {
        let f = write_tmp("a,id\n5,90\n6,91\n");
        let d = load_csv(f.path(), None).unwrap();
        assert_eq!(d.column_names(), ["a"]);
        assert_eq!(d.ids(), [0, 1]);
    }

    #[test]
    fn save_appends_id_and_keeps_header_order() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        save_csv(&d, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "a,b,y,id");
        let back = load_csv(&p, Some("y")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn zero_rows_saves_header_only() {
        let d = Dataset::new(vec!["a".into(), "b".into()], Array2::zeros((0, 2)), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        save_csv(&d, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b,id\n");
    }

    #[test]
    fn save_to_missing_dir_reports_path() {
        let d = small();
        let err = save_csv(&d, "/nonexistent-dir/x.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn mask_marks_zeros_only_in_impute_columns() {
        let d = small();
        let m = derive_mask(&d, &["b".into()]).unwrap();
        assert!(m.is_missing(0, 1));
        assert!(!m.is_missing(1, 0));
        assert_eq!(m.total(), 1);
        assert_eq!(m.count_in_column(0), 0);
    }

    #[test]
    fn mask_column_without_zeros_is_all_false() {
        let d = small();
        let m = derive_mask(&d, &["b".into()]).unwrap();
        assert_eq!(m.count_in_column(1), 1);
        let d2 = Dataset::new(vec!["a".into()], array![[1.0], [2.0]], None).unwrap();
        let m2 = derive_mask(&d2, &["a".into()]).unwrap();
        assert!(m2.is_empty());
    }

    #[test]
    fn target_and_unknown_columns_rejected() {
        let d = small();
        assert!(matches!(
            derive_mask(&d, &["y".into()]),
            Err(Error::NotImputable(_))
        ));
        assert!(matches!(
            derive_mask(&d, &["id".into()]),
            Err(Error::NotImputable(_))
        ));
        assert!(matches!(
            derive_mask(&d, &["zzz".into()]),
            Err(Error::UnknownColumn(_))
        ));
    }
}
