//! Plain-text dataset files and result tables.
//!
//! Matrices are comma-separated with one header row (`r0001, r0002, …`) and
//! one row per observation; rest signals use the same layout. Labels carry
//! `volume_index,condition,session` and coordinates `region,x_mm,y_mm,z_mm`.
//! Lines starting with `#` are comments. Dataset values are written with the
//! shortest representation that parses back to the same `f64`, so a written
//! dataset reloads bit-identically; result tables use 6 significant digits.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use neurogsp::builders::RestMatrix;
use neurogsp::dataset::Dataset;
use neurogsp::{Error, Result};

/// Provenance lines embedded as `#` comments at the top of every file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub config_hash: String,
    pub seed: u64,
}

impl FileHeader {
    fn render(&self) -> String {
        format!("# config_sha256: {}\n# seed: {}\n", self.config_hash, self.seed)
    }
}

/// Locations of the four files of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub signals: PathBuf,
    pub labels: PathBuf,
    pub coords: PathBuf,
    pub rest: PathBuf,
}

impl DatasetPaths {
    /// `signals.csv`, `labels.csv`, `coords.csv` and `rest.csv` in `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            signals: dir.join("signals.csv"),
            labels: dir.join("labels.csv"),
            coords: dir.join("coords.csv"),
            rest: dir.join("rest.csv"),
        }
    }
}

/// Formats `x` with 6 significant digits, no exponent for ordinary
/// magnitudes and no locale dependence.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // A value such as 9.999996 rounds up to a longer mantissa; reformat
        // from the rounded value so the digit count stays at 6.
        let rounded: f64 = s.parse().expect("formatted float");
        let m2 = rounded.abs().log10().floor() as i32;
        if m2 != magnitude {
            let decimals = (5 - m2).max(0) as usize;
            return format!("{rounded:.decimals$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place, so a crash never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Column names `r0001 … rNNNN`.
pub fn region_header(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("r{i:04}")).collect()
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Data rows of a CSV file with its header, as `(line number, fields)`.
struct Table {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, column: &str, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("column `{column}`: cannot parse `{field}`")))
}

fn expect_header(path: &Path, table: &Table, expected: &[String]) -> Result<()> {
    if table.header.len() != expected.len() {
        return Err(parse_err(
            path,
            1,
            format!("expected {} columns, header has {}", expected.len(), table.header.len()),
        ));
    }
    if let Some((got, want)) = table.header.iter().zip(expected).find(|(g, w)| g != w) {
        return Err(parse_err(path, 1, format!("expected column `{want}`, found `{got}`")));
    }
    Ok(())
}

/// Observations × regions matrix with an `r0001…` header.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let table = read_table(path)?;
    let n = table.header.len();
    if n == 0 {
        return Err(parse_err(path, 1, "empty header"));
    }
    expect_header(path, &table, &region_header(n))?;
    let mut values = Vec::with_capacity(table.rows.len() * n);
    for (line, fields) in &table.rows {
        if fields.len() != n {
            return Err(parse_err(path, *line, format!("expected {n} fields, found {}", fields.len())));
        }
        for (col, f) in table.header.iter().zip(fields) {
            let v: f64 = parse_field(path, *line, col, f)?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("column `{col}`: non-finite value `{f}`")));
            }
            values.push(v);
        }
    }
    Array2::from_shape_vec((table.rows.len(), n), values).map_err(|e| Error::Dimension(e.to_string()))
}

pub fn matrix_csv(m: &Array2<f64>, header: &FileHeader) -> String {
    let mut out = header.render();
    out.push_str(&region_header(m.ncols()).join(","));
    out.push('\n');
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// `(labels, sessions)` from a `volume_index,condition,session` file.
pub fn read_labels(path: &Path) -> Result<(Vec<u8>, Vec<u32>)> {
    let table = read_table(path)?;
    let cols = ["volume_index", "condition", "session"].map(String::from);
    expect_header(path, &table, &cols)?;
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut sessions = Vec::with_capacity(table.rows.len());
    for (i, (line, fields)) in table.rows.iter().enumerate() {
        if fields.len() != 3 {
            return Err(parse_err(path, *line, format!("expected 3 fields, found {}", fields.len())));
        }
        let index: usize = parse_field(path, *line, "volume_index", &fields[0])?;
        if index != i {
            return Err(parse_err(path, *line, format!("volume_index {index} out of order (expected {i})")));
        }
        let condition: u8 = parse_field(path, *line, "condition", &fields[1])
            .ok()
            .filter(|c| *c <= 1)
            .ok_or_else(|| parse_err(path, *line, format!("condition `{}` is not 0 or 1", fields[1])))?;
        labels.push(condition);
        sessions.push(parse_field(path, *line, "session", &fields[2])?);
    }
    Ok((labels, sessions))
}

pub fn labels_csv(labels: &[u8], sessions: &[u32], header: &FileHeader) -> String {
    let mut out = header.render();
    out.push_str("volume_index,condition,session\n");
    for (i, (l, s)) in labels.iter().zip(sessions).enumerate() {
        writeln!(out, "{i},{l},{s}").expect("writing to a String");
    }
    out
}

/// `N×3` millimetre coordinates from a `region,x_mm,y_mm,z_mm` file.
pub fn read_coords(path: &Path) -> Result<Array2<f64>> {
    let table = read_table(path)?;
    let cols = ["region", "x_mm", "y_mm", "z_mm"].map(String::from);
    expect_header(path, &table, &cols)?;
    let mut values = Vec::with_capacity(table.rows.len() * 3);
    for (line, fields) in &table.rows {
        if fields.len() != 4 {
            return Err(parse_err(path, *line, format!("expected 4 fields, found {}", fields.len())));
        }
        for (col, f) in cols[1..].iter().zip(&fields[1..]) {
            let v: f64 = parse_field(path, *line, col, f)?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("column `{col}`: non-finite value `{f}`")));
            }
            values.push(v);
        }
    }
    Array2::from_shape_vec((table.rows.len(), 3), values).map_err(|e| Error::Dimension(e.to_string()))
}

pub fn coords_csv(coords: &Array2<f64>, header: &FileHeader) -> String {
    let mut out = header.render();
    out.push_str("region,x_mm,y_mm,z_mm\n");
    for (i, row) in coords.rows().into_iter().enumerate() {
        writeln!(out, "r{:04},{:?},{:?},{:?}", i + 1, row[0], row[1], row[2]).expect("writing to a String");
    }
    out
}

/// Loads and validates one run.
pub fn load_dataset(paths: &DatasetPaths, subject_id: &str) -> Result<Dataset> {
    let signals = read_matrix(&paths.signals)?;
    let (labels, sessions) = read_labels(&paths.labels)?;
    let coords = read_coords(&paths.coords)?;
    let rest = read_matrix(&paths.rest)?;
    let (t, n) = signals.dim();
    if labels.len() != t {
        return Err(Error::Dimension(format!(
            "{} has {t} observations but {} has {} rows",
            paths.signals.display(),
            paths.labels.display(),
            labels.len()
        )));
    }
    if coords.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} has {n} region columns but {} has {} rows",
            paths.signals.display(),
            paths.coords.display(),
            coords.nrows()
        )));
    }
    if rest.ncols() != n {
        return Err(Error::Dimension(format!(
            "{} has {n} region columns but {} has {}",
            paths.signals.display(),
            paths.rest.display(),
            rest.ncols()
        )));
    }
    let rest = RestMatrix::new(rest.t().to_owned())?;
    let ds = Dataset::new(signals, labels, sessions, rest, coords, subject_id)?;
    let [c0, c1] = ds.condition_counts();
    log::info!(
        "loaded {subject_id}: {t} observations, {n} regions, {} sessions, conditions {c0}/{c1}",
        ds.session_ids().len()
    );
    Ok(ds)
}

/// Writes the four files of `ds` into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path, header: &FileHeader) -> Result<DatasetPaths> {
    let paths = DatasetPaths::in_dir(dir);
    write_atomic(&paths.signals, &matrix_csv(&ds.signals, header))?;
    write_atomic(&paths.labels, &labels_csv(&ds.labels, &ds.sessions, header))?;
    write_atomic(&paths.coords, &coords_csv(&ds.coords, header))?;
    write_atomic(&paths.rest, &matrix_csv(&ds.rest.data().t().to_owned(), header))?;
    Ok(paths)
}

/// Result table: header comments, one header row, 6-significant-digit
/// numbers.
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One cell of a [`CsvTable`].
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the header");
        self.rows.push(
            cells
                .into_iter()
                .map(|c| match c {
                    Cell::Text(s) => quote(&s),
                    Cell::Int(v) => v.to_string(),
                    Cell::Num(v) => fmt_sig6(v),
                })
                .collect(),
        );
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, header: &FileHeader) -> String {
        let mut out = header.render();
        out.push_str(&self.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, header: &FileHeader) -> Result<()> {
        write_atomic(path, &self.render(header))
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a result table written by [`CsvTable`] back as strings.
pub fn read_result_table(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let t = read_table(path)?;
    Ok((t.header, t.rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.725), "0.725000");
        assert_eq!(fmt_sig6(72.5), "72.5000");
        assert_eq!(fmt_sig6(-1.0), "-1.00000");
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(9.9999996), "10.0000");
        assert_eq!(fmt_sig6(123456789.0), "123456789");
        assert_eq!(fmt_sig6(1.5e-9), "1.50000e-9");
        assert_eq!(fmt_sig6(0.000123456789), "0.000123457");
    }

    #[test]
    fn header_names() {
        assert_eq!(region_header(3), vec!["r0001", "r0002", "r0003"]);
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("|Correlation|"), "|Correlation|");
    }
}
