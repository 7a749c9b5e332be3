//! Tabular datasets: CSV ingestion, standardisation with externally supplied
//! statistics, and feature encoding for the models.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cv::{mean, sample_sd};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<f64>),
    /// Levels in order of first appearance; `codes[i]` indexes `levels`.
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            data: ColumnData::Continuous(values),
        }
    }

    /// Builds a categorical column, enumerating levels by first appearance.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                *lookup.entry(v.to_string()).or_insert_with(|| {
                    levels.push(v.to_string());
                    levels.len() - 1
                })
            })
            .collect();
        Self {
            name: name.into(),
            data: ColumnData::Categorical { levels, codes },
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Continuous(_) => ColumnKind::Continuous,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    fn cell(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Continuous(v) => format!("{}", v[row]),
            ColumnData::Categorical { levels, codes } => levels[codes[row]].clone(),
        }
    }
}

/// A rectangular table of typed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, provenance: impl Into<String>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        for c in &columns {
            if c.data.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: n_rows,
                    right: c.data.len(),
                });
            }
            if let ColumnData::Continuous(v) = &c.data {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Data {
                        row: row + 1,
                        column: c.name.clone(),
                        message: "non-finite value".into(),
                    });
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.name.as_str())) {
            return Err(Error::InvalidParameter(format!("duplicate column '{}'", dup.name)));
        }
        Ok(Self {
            columns,
            n_rows,
            provenance: provenance.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn continuous(&self, name: &str) -> Result<&[f64]> {
        match &self.column(name)?.data {
            ColumnData::Continuous(v) => Ok(v),
            ColumnData::Categorical { .. } => Err(Error::InvalidParameter(format!(
                "column '{name}' is categorical, a numeric column is required"
            ))),
        }
    }

    /// Rows `rows` of the given continuous columns as an `|rows| × d` matrix.
    pub fn matrix(&self, names: &[String], rows: &[usize]) -> Result<DMatrix<f64>> {
        let cols = names
            .iter()
            .map(|n| self.continuous(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(rows.len(), names.len(), |i, j| cols[j][rows[i]]))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.select(rows),
                })
                .collect(),
            n_rows: rows.len(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for r in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cell(r)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column kinds for ingestion. Columns not listed as categorical are parsed
/// as numbers, unless `numeric` is set, in which case only the columns it
/// names are parsed and every other column is kept as text levels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub numeric: Option<Vec<String>>,
}

impl Schema {
    pub fn with_categorical(categorical: Vec<String>) -> Self {
        Self {
            categorical,
            numeric: None,
        }
    }

    /// Parses only `columns` as numbers.
    pub fn numeric_only(columns: Vec<String>) -> Self {
        Self {
            categorical: Vec::new(),
            numeric: Some(columns),
        }
    }

    pub fn kind(&self, name: &str) -> ColumnKind {
        if self.categorical.iter().any(|c| c == name) {
            return ColumnKind::Categorical;
        }
        match &self.numeric {
            Some(cols) if !cols.iter().any(|c| c == name) => ColumnKind::Categorical,
            _ => ColumnKind::Continuous,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, path.display().to_string())
}

/// Parses CSV text with a header row. Rows are numbered from 1 (the first
/// data row) in error messages; missing cells are rejected.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, provenance: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() {
        return Err(Error::Empty("header row".into()));
    }
    for c in schema.categorical.iter().chain(schema.numeric.iter().flatten()) {
        if !header.contains(c) {
            return Err(Error::UnknownColumn(c.clone()));
        }
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::Data {
                row,
                column: header.get(record.len()).cloned().unwrap_or_default(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if is_missing(cell) {
                return Err(Error::Data {
                    row,
                    column: header[j].clone(),
                    message: "missing value".into(),
                });
            }
            cells[j].push(cell.to_string());
        }
    }
    let columns = header
        .iter()
        .zip(cells)
        .map(|(name, values)| match schema.kind(name) {
            ColumnKind::Categorical => Ok(Column::categorical(name.clone(), &values)),
            ColumnKind::Continuous => {
                let parsed = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::Data {
                                row: i + 1,
                                column: name.clone(),
                                message: format!("'{v}' is not a finite number"),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Column::continuous(name.clone(), parsed))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(columns, provenance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub sd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub columns: Vec<ColumnStats>,
}

impl StandardizationStats {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Mean and sample sd of each continuous column in `names`, computed from
/// `rows` only. Categorical columns are skipped.
pub fn fit_standardization(
    dataset: &Dataset,
    rows: &[usize],
    names: &[String],
) -> Result<StandardizationStats> {
    let mut columns = Vec::new();
    for name in names {
        let col = dataset.column(name)?;
        if let ColumnData::Continuous(v) = &col.data {
            let values: Vec<f64> = rows.iter().map(|&r| v[r]).collect();
            if values.len() < 2 {
                return Err(Error::TooShort {
                    min: 2,
                    got: values.len(),
                });
            }
            let sd = sample_sd(&values);
            if !(sd > 0.0) {
                return Err(Error::Degenerate(format!(
                    "column '{name}' has zero variance in the statistics rows"
                )));
            }
            columns.push(ColumnStats {
                name: name.clone(),
                mean: mean(&values),
                sd,
            });
        }
    }
    Ok(StandardizationStats { columns })
}

/// Z-scores every continuous column that has statistics; other columns are
/// copied unchanged.
pub fn standardize(dataset: &Dataset, stats: &StandardizationStats) -> Result<Dataset> {
    for s in &stats.columns {
        dataset.continuous(&s.name)?;
    }
    let columns = dataset
        .columns
        .iter()
        .map(|c| match (&c.data, stats.get(&c.name)) {
            (ColumnData::Continuous(v), Some(s)) => {
                Column::continuous(c.name.clone(), v.iter().map(|x| (x - s.mean) / s.sd).collect())
            }
            _ => c.clone(),
        })
        .collect();
    Ok(Dataset {
        columns,
        n_rows: dataset.n_rows,
        provenance: dataset.provenance.clone(),
    })
}

/// How categorical features become model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// One indicator per level except the first (for models with an
    /// intercept).
    DropFirst,
    /// One indicator per level.
    Full,
}

/// Contiguous input columns that belong to one named feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub name: String,
    pub columns: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub matrix: DMatrix<f64>,
    pub groups: Vec<FeatureGroup>,
}

impl Design {
    pub fn n_inputs(&self) -> usize {
        self.matrix.ncols()
    }

    /// Input column indices of group `g`.
    pub fn group_columns(&self, g: usize) -> Vec<usize> {
        self.groups[g].columns.clone().collect()
    }

    /// The design with group `g` removed.
    pub fn without_group(&self, g: usize) -> DMatrix<f64> {
        let drop = &self.groups[g].columns;
        let keep: Vec<usize> = (0..self.n_inputs()).filter(|j| !drop.contains(j)).collect();
        DMatrix::from_fn(self.matrix.nrows(), keep.len(), |i, j| self.matrix[(i, keep[j])])
    }
}

/// Builds the model input matrix for `rows`, standardising continuous
/// features with `stats` and expanding categorical ones into indicators.
pub fn encode_features(
    dataset: &Dataset,
    features: &[String],
    rows: &[usize],
    stats: &StandardizationStats,
    encoding: Encoding,
) -> Result<Design> {
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut groups = Vec::new();
    let mut width = 0;
    for name in features {
        let col = dataset.column(name)?;
        let block: Vec<Vec<f64>> = match &col.data {
            ColumnData::Continuous(v) => {
                let s = stats.get(name).ok_or_else(|| {
                    Error::InvalidParameter(format!("no standardisation statistics for '{name}'"))
                })?;
                vec![rows.iter().map(|&r| (v[r] - s.mean) / s.sd).collect()]
            }
            ColumnData::Categorical { levels, codes } => {
                let first = match encoding {
                    Encoding::DropFirst => 1,
                    Encoding::Full => 0,
                };
                (first..levels.len())
                    .map(|l| rows.iter().map(|&r| f64::from(u8::from(codes[r] == l))).collect())
                    .collect()
            }
        };
        groups.push(FeatureGroup {
            name: name.clone(),
            columns: width..width + block.len(),
        });
        width += block.len();
        blocks.push(block);
    }
    let flat: Vec<&Vec<f64>> = blocks.iter().flatten().collect();
    let matrix = DMatrix::from_fn(rows.len(), width, |i, j| flat[j][i]);
    Ok(Design { matrix, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "x,sector,y\n1.5,A,0.2\n2.5,B,0.4\n3.5,A,0.9\n";

    fn schema() -> Schema {
        Schema::with_categorical(vec!["sector".into()])
    }

    #[test]
    fn reads_well_formed_file() {
        let ds = read_csv(TEXT.as_bytes(), &schema(), "inline").unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.continuous("y").unwrap(), &[0.2, 0.4, 0.9]);
        match &ds.column("sector").unwrap().data {
            ColumnData::Categorical { levels, codes } => {
                assert_eq!(levels, &["A", "B"]);
                assert_eq!(codes, &[0, 1, 0]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn missing_cell_names_row_and_column() {
        let text = "x,sector,y\n1,A,0.2\n2,,0.4\n";
        match read_csv(text.as_bytes(), &schema(), "inline") {
            Err(Error::Data { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "sector");
            }
            other => panic!("expected data error, got {other:?}"),
        }
        let text = "x,sector,y\n1,A,abc\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema(), "inline"),
            Err(Error::Data { row: 1, .. })
        ));
        let bad_schema = Schema::with_categorical(vec!["nope".into()]);
        assert!(matches!(
            read_csv(TEXT.as_bytes(), &bad_schema, "inline"),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn numeric_only_keeps_other_columns_as_text() {
        let ds = read_csv(TEXT.as_bytes(), &Schema::numeric_only(vec!["y".into()]), "inline").unwrap();
        assert_eq!(ds.column("x").unwrap().kind(), ColumnKind::Categorical);
        assert_eq!(ds.continuous("y").unwrap(), &[0.2, 0.4, 0.9]);
    }

    #[test]
    fn five_levels_in_first_appearance_order() {
        let c = Column::categorical("s", &["e", "c", "e", "a", "b", "d", "c"]);
        match c.data {
            ColumnData::Categorical { levels, .. } => assert_eq!(levels, ["e", "c", "a", "b", "d"]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn standardize_own_stats() {
        let ds = Dataset::new(vec![Column::continuous("x", vec![1.0, 2.0, 3.0])], "t").unwrap();
        let stats = fit_standardization(&ds, &[0, 1, 2], &["x".into()]).unwrap();
        let z = standardize(&ds, &stats).unwrap();
        assert_eq!(z.continuous("x").unwrap(), &[-1.0, 0.0, 1.0]);
        let again = standardize(&z, &fit_standardization(&z, &[0, 1, 2], &["x".into()]).unwrap()).unwrap();
        for (a, b) in again.continuous("x").unwrap().iter().zip(z.continuous("x").unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = Dataset::new(vec![Column::continuous("x", vec![1.0, 1.0])], "t").unwrap();
        assert!(fit_standardization(&c, &[0, 1], &["x".into()]).is_err());
    }

    #[test]
    fn encoding_blocks() {
        let ds = read_csv(TEXT.as_bytes(), &schema(), "inline").unwrap();
        let feats = vec!["x".to_string(), "sector".to_string()];
        let stats = fit_standardization(&ds, &[0, 1, 2], &feats).unwrap();
        let d = encode_features(&ds, &feats, &[0, 1, 2], &stats, Encoding::Full).unwrap();
        assert_eq!(d.n_inputs(), 3);
        assert_eq!(d.groups[1].columns, 1..3);
        assert_eq!(d.matrix.column(2).as_slice(), &[0.0, 1.0, 0.0]);
        let d = encode_features(&ds, &feats, &[0, 1, 2], &stats, Encoding::DropFirst).unwrap();
        assert_eq!(d.n_inputs(), 2);
        assert_eq!(d.without_group(1).ncols(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let ds = read_csv(TEXT.as_bytes(), &schema(), "inline").unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema(), "inline").unwrap();
        assert_eq!(ds, back);
    }
}
