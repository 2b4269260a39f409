//! Dataset manifests, pooled sample tables and vector-magnitude synthesis.
//!
//! A manifest lists the source files of a dataset, maps their columns onto
//! channel names and declares magnitude channels to synthesize. Loading pools
//! every file (one per user, typically) into a single column-major table;
//! missing cells are stored as `NaN`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How missing cells are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Keep incomplete rows; every analysis drops rows that are incomplete
    /// for its own channel subset.
    #[default]
    DropRowForSubset,
    /// Drop every row that has a missing value in any channel at load time.
    DropValue,
}

/// Arrangement of values inside a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One record per time step, one column per channel.
    #[default]
    Rows,
    /// A single channel stored as fixed-length windows, one window per line.
    Windows,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSpec {
    pub path: PathBuf,
    /// channel name -> source column. A source column is a header name, or
    /// `#N` for the zero-based column index. In a primary file, unmapped
    /// channels are looked up by their own name. A windows-layout file maps
    /// exactly one channel (the column value is ignored).
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub layout: Layout,
    /// Windows layout: keep only the first `n` values of each window, e.g.
    /// the non-overlapping half of 50%-overlap windows.
    #[serde(default)]
    pub window_take: Option<usize>,
    /// Row-aligned companion files whose mapped channels are read side by
    /// side with this one.
    #[serde(default)]
    pub join: Vec<FileSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagnitudeSpec {
    pub x: String,
    pub y: String,
    pub z: String,
    pub name: String,
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> String {
    ",".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub files: Vec<FileSpec>,
    pub channels: Vec<String>,
    #[serde(default)]
    pub magnitude_specs: Vec<MagnitudeSpec>,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    /// Reject non-numeric cells instead of treating them as missing.
    #[serde(default = "default_true")]
    pub strict: bool,
    /// Single-character delimiter, or `whitespace`.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

impl DatasetManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let manifest: DatasetManifest = toml::from_str(text)?;
        manifest.check()?;
        Ok(manifest)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks the structural invariants: unique channel names and magnitude
    /// specs that reference declared channels and introduce new names.
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateChannel(c.clone()));
            }
        }
        let declared: HashSet<&str> = self.channels.iter().map(String::as_str).collect();
        for m in &self.magnitude_specs {
            for axis in [&m.x, &m.y, &m.z] {
                if !declared.contains(axis.as_str()) {
                    return Err(Error::InvalidManifest(format!(
                        "magnitude `{}` references undeclared channel `{axis}`",
                        m.name
                    )));
                }
            }
            if !seen.insert(m.name.as_str()) {
                return Err(Error::DuplicateChannel(m.name.clone()));
            }
        }
        for file in &self.files {
            for part in std::iter::once(file).chain(&file.join) {
                if part.layout == Layout::Windows && part.columns.len() != 1 {
                    return Err(Error::InvalidManifest(format!(
                        "windows-layout file {} must map exactly one channel",
                        part.path.display()
                    )));
                }
                if let Some(c) = part.columns.keys().find(|c| !declared.contains(c.as_str())) {
                    return Err(Error::UnknownChannel(c.clone()));
                }
            }
            if file.join.iter().any(|j| !j.join.is_empty()) {
                return Err(Error::InvalidManifest("joined files cannot have joins".into()));
            }
        }
        if self.delimiter != "whitespace" && self.delimiter.len() != 1 {
            return Err(Error::InvalidManifest(format!(
                "delimiter must be a single byte or `whitespace`, got {:?}",
                self.delimiter
            )));
        }
        Ok(())
    }
}

/// Pooled, time-aligned samples with one column per channel. `NaN` marks a
/// missing slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    source: String,
    channels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn new(source: impl Into<String>, channels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: channels.len(),
                right: columns.len(),
            });
        }
        let mut seen = HashSet::new();
        for c in &channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateChannel(c.clone()));
            }
        }
        if let Some(first) = columns.first() {
            for col in &columns {
                if col.len() != first.len() {
                    return Err(Error::RaggedColumns {
                        expected: first.len(),
                        got: col.len(),
                    });
                }
            }
        }
        Ok(SampleTable {
            source: source.into(),
            channels,
            columns,
        })
    }

    /// Builds a table from row-major samples.
    pub fn from_rows(source: impl Into<String>, channels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); channels.len()];
        for row in rows {
            if row.len() != channels.len() {
                return Err(Error::RaggedColumns {
                    expected: channels.len(),
                    got: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::new(source, channels, columns)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn column_at(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    pub fn has_missing(&self, index: usize) -> bool {
        self.columns[index].iter().any(|v| v.is_nan())
    }

    /// Non-missing values of one channel.
    pub fn present_values(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(name)?.iter().copied().filter(|v| !v.is_nan()).collect())
    }

    /// Rows with a value in every listed channel.
    pub fn complete_rows(&self, indices: &[usize]) -> Vec<usize> {
        (0..self.row_count())
            .filter(|&r| indices.iter().all(|&c| !self.columns[c][r].is_nan()))
            .collect()
    }

    /// Projection onto the named channels, in the given order.
    pub fn select(&self, names: &[String]) -> Result<SampleTable> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            columns.push(self.columns[self.index_of(n)?].clone());
        }
        SampleTable::new(self.source.clone(), names.to_vec(), columns)
    }

    /// Drops every row that is missing a value in any channel.
    pub fn drop_incomplete_rows(&self) -> SampleTable {
        let all: Vec<usize> = (0..self.channels.len()).collect();
        let keep = self.complete_rows(&all);
        let columns = self
            .columns
            .iter()
            .map(|c| keep.iter().map(|&r| c[r]).collect())
            .collect();
        SampleTable {
            source: self.source.clone(),
            channels: self.channels.clone(),
            columns,
        }
    }

    /// Appends the Euclidean norm of three channels as a new channel.
    pub fn add_magnitude(&self, x: &str, y: &str, z: &str, name: &str) -> Result<SampleTable> {
        let (xi, yi, zi) = (self.index_of(x)?, self.index_of(y)?, self.index_of(z)?);
        if self.channels.iter().any(|c| c == name) {
            return Err(Error::DuplicateChannel(name.to_string()));
        }
        let (cx, cy, cz) = (&self.columns[xi], &self.columns[yi], &self.columns[zi]);
        let magnitude = (0..self.row_count())
            .map(|r| vector_magnitude(cx[r], cy[r], cz[r]))
            .collect();
        let mut out = self.clone();
        out.channels.push(name.to_string());
        out.columns.push(magnitude);
        Ok(out)
    }
}

/// √(x²+y²+z²), missing when any component is missing.
///
/// The squares are summed in ascending order so the result is bitwise
/// identical under any permutation or sign flip of the axes.
pub fn vector_magnitude(x: f64, y: f64, z: f64) -> f64 {
    if x.is_nan() || y.is_nan() || z.is_nan() {
        return f64::NAN;
    }
    let mut sq = [x * x, y * y, z * z];
    sq.sort_by(f64::total_cmp);
    (sq[0] + sq[1] + sq[2]).sqrt()
}

/// Loads and pools every manifest file under `root`, then appends the
/// declared magnitude channels.
pub fn load_table(manifest: &DatasetManifest, root: impl AsRef<Path>) -> Result<SampleTable> {
    manifest.check()?;
    if manifest.files.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let root = root.as_ref();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); manifest.channels.len()];
    for file in &manifest.files {
        let group = read_group(manifest, file, root)?;
        for (out, values) in columns.iter_mut().zip(group) {
            out.extend(values);
        }
    }
    let mut table = SampleTable::new(manifest.name.clone(), manifest.channels.clone(), columns)?;
    for m in &manifest.magnitude_specs {
        table = table.add_magnitude(&m.x, &m.y, &m.z, &m.name)?;
    }
    if manifest.missing_policy == MissingPolicy::DropValue {
        table = table.drop_incomplete_rows();
    }
    Ok(table)
}

/// Optional header row and the remaining records of a delimited file.
type Records = (Option<Vec<String>>, Vec<Vec<String>>);

fn read_records(manifest: &DatasetManifest, path: &Path) -> Result<Records> {
    if manifest.delimiter == "whitespace" {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = if manifest.has_header {
            lines.next().map(|l| l.split_whitespace().map(str::to_string).collect())
        } else {
            None
        };
        let records = lines
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect();
        return Ok((header, records));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(manifest.delimiter.as_bytes()[0])
        .has_headers(manifest.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = if manifest.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, records))
}

fn resolve_column(header: Option<&[String]>, column: &str, path: &Path) -> Result<usize> {
    let unresolved = || Error::UnresolvedColumn {
        path: path.to_path_buf(),
        column: column.to_string(),
    };
    if let Some(idx) = column.strip_prefix('#') {
        return idx.parse().map_err(|_| unresolved());
    }
    header
        .and_then(|h| h.iter().position(|c| c == column))
        .ok_or_else(unresolved)
}

/// Reads a primary file and its joins into one row-aligned block with a
/// column for every manifest channel.
fn read_group(manifest: &DatasetManifest, file: &FileSpec, root: &Path) -> Result<Vec<Vec<f64>>> {
    let joined: HashSet<&str> = file.join.iter().flat_map(|j| j.columns.keys().map(String::as_str)).collect();
    let mut block: Vec<Option<Vec<f64>>> = vec![None; manifest.channels.len()];
    for (i, part) in std::iter::once(file).chain(&file.join).enumerate() {
        let path = root.join(&part.path);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        let wanted: Vec<usize> = manifest
            .channels
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                part.columns.contains_key(*c)
                    || (i == 0 && part.layout == Layout::Rows && !joined.contains(c.as_str()))
            })
            .map(|(k, _)| k)
            .collect();
        let values = match part.layout {
            Layout::Rows => read_rows(manifest, part, &path, &wanted)?,
            Layout::Windows => vec![read_windows(manifest, part, &path)?],
        };
        for (k, v) in wanted.into_iter().zip(values) {
            if block[k].is_some() {
                return Err(Error::DuplicateChannel(manifest.channels[k].clone()));
            }
            block[k] = Some(v);
        }
    }
    let mut out = Vec::with_capacity(block.len());
    let mut expected = None;
    for (k, col) in block.into_iter().enumerate() {
        let col = col.ok_or_else(|| Error::UnresolvedColumn {
            path: file.path.clone(),
            column: manifest.channels[k].clone(),
        })?;
        match expected {
            None => expected = Some(col.len()),
            Some(n) if n != col.len() => {
                return Err(Error::RaggedColumns {
                    expected: n,
                    got: col.len(),
                })
            }
            _ => {}
        }
        out.push(col);
    }
    Ok(out)
}

fn read_rows(manifest: &DatasetManifest, file: &FileSpec, path: &Path, wanted: &[usize]) -> Result<Vec<Vec<f64>>> {
    let (header, records) = read_records(manifest, path)?;
    let mut sources = Vec::with_capacity(wanted.len());
    for &k in wanted {
        let channel = &manifest.channels[k];
        let column = file.columns.get(channel).unwrap_or(channel);
        sources.push((column.as_str(), resolve_column(header.as_deref(), column, path)?));
    }
    let mut columns = vec![Vec::with_capacity(records.len()); wanted.len()];
    for (record_no, record) in records.iter().enumerate() {
        for ((column, idx), out) in sources.iter().zip(columns.iter_mut()) {
            let cell = record.get(*idx).map_or("", |s| s.as_str());
            out.push(parse_cell(cell, manifest.strict).ok_or_else(|| Error::NonNumeric {
                path: path.to_path_buf(),
                record: record_no + 1,
                column: column.to_string(),
                value: cell.to_string(),
            })?);
        }
    }
    Ok(columns)
}

fn read_windows(manifest: &DatasetManifest, file: &FileSpec, path: &Path) -> Result<Vec<f64>> {
    let (_, records) = read_records(manifest, path)?;
    let channel = file.columns.keys().next().expect("checked: one channel");
    let mut out = Vec::new();
    for (record_no, record) in records.iter().enumerate() {
        let take = file.window_take.unwrap_or(record.len()).min(record.len());
        for cell in &record[..take] {
            out.push(parse_cell(cell, manifest.strict).ok_or_else(|| Error::NonNumeric {
                path: path.to_path_buf(),
                record: record_no + 1,
                column: channel.clone(),
                value: cell.clone(),
            })?);
        }
    }
    Ok(out)
}

/// Empty cells and NaN/NA markers are missing. Other non-numeric text is an
/// error in strict mode and missing otherwise.
fn parse_cell(cell: &str, strict: bool) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
        return Some(f64::NAN);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ if strict => None,
        _ => Some(f64::NAN),
    }
}
