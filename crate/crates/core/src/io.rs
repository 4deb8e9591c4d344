//! Long-format CSV ingestion and file outputs.
//!
//! Data files carry one observation per line under the header
//! `t,i,j,value` (two modes) or `t,i,j,k,value` (three modes). Entity
//! labels map to dense indices in first-appearance order unless a label
//! map is supplied. Every integer time between the first and last observed
//! `t` becomes a slice; cells without a record are zero.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{BlinError, Result};
use crate::series::TensorSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct LongRecord {
    pub t: i64,
    pub i: String,
    pub j: String,
    pub k: Option<String>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestOptions {
    pub center: bool,
    pub standardize: bool,
    pub difference: bool,
    /// Reject files with missing cells instead of zero-filling them.
    pub strict: bool,
    /// Fixed label order per mode; labels outside the map are an error.
    #[serde(skip)]
    pub label_maps: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub records: usize,
    /// Cells with no record, set to zero.
    pub filled: usize,
    pub labels: Vec<Vec<String>>,
    /// Original time value of each slice before any differencing.
    pub times: Vec<i64>,
    pub transforms: Vec<String>,
}

pub fn read_long_records<R: Read>(reader: R) -> Result<Vec<LongRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let three_mode = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "i", "j", "value"] => false,
        ["t", "i", "j", "k", "value"] => true,
        _ => {
            return Err(BlinError::Parse {
                record: 0,
                message: format!("expected header t,i,j[,k],value, got {}", headers.join(",")),
            })
        }
    };
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let record = n + 1;
        let field = |c: usize| row.get(c).unwrap_or("");
        let t = field(0)
            .parse::<i64>()
            .map_err(|e| BlinError::Parse { record, message: format!("time {:?}: {e}", field(0)) })?;
        let vcol = if three_mode { 4 } else { 3 };
        let value = field(vcol)
            .parse::<f64>()
            .map_err(|e| BlinError::Parse { record, message: format!("value {:?}: {e}", field(vcol)) })?;
        if !value.is_finite() {
            return Err(BlinError::Parse { record, message: format!("non-finite value {value}") });
        }
        out.push(LongRecord {
            t,
            i: field(1).to_string(),
            j: field(2).to_string(),
            k: three_mode.then(|| field(3).to_string()),
            value,
        });
    }
    Ok(out)
}

/// One `mode,label` line per entity; the line order within a mode is the
/// index order. Modes are named `i`, `j` and `k`.
pub fn read_label_map<R: Read>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut maps: Vec<Vec<String>> = vec![Vec::new(); 3];
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let mode = match row.get(0) {
            Some("i") => 0,
            Some("j") => 1,
            Some("k") => 2,
            other => {
                return Err(BlinError::Parse { record: n + 1, message: format!("unknown mode {other:?}") })
            }
        };
        let label = row.get(1).unwrap_or("").to_string();
        if maps[mode].contains(&label) {
            return Err(BlinError::DuplicateKey(format!("label {label} listed twice")));
        }
        maps[mode].push(label);
    }
    while maps.last().is_some_and(|m| m.is_empty()) {
        maps.pop();
    }
    Ok(maps)
}

struct Indexer {
    order: Vec<String>,
    lookup: HashMap<String, usize>,
    fixed: bool,
}

impl Indexer {
    fn new(fixed: Option<&Vec<String>>) -> Self {
        let order = fixed.cloned().unwrap_or_default();
        let lookup = order.iter().enumerate().map(|(n, l)| (l.clone(), n)).collect();
        Indexer { order, lookup, fixed: fixed.is_some() }
    }

    fn index(&mut self, label: &str, record: usize) -> Result<usize> {
        if let Some(&n) = self.lookup.get(label) {
            return Ok(n);
        }
        if self.fixed {
            return Err(BlinError::Parse { record, message: format!("label {label:?} missing from the label map") });
        }
        self.order.push(label.to_string());
        self.lookup.insert(label.to_string(), self.order.len() - 1);
        Ok(self.order.len() - 1)
    }
}

/// Dense series from long records. Transforms run in the order center or
/// standardize, then difference.
pub fn series_from_records(records: &[LongRecord], opts: &IngestOptions) -> Result<(TensorSeries, IngestReport)> {
    let first = records.first().ok_or(BlinError::InsufficientData { horizon: 0, required: 1 })?;
    let modes = if first.k.is_some() { 3 } else { 2 };
    if let Some(maps) = &opts.label_maps {
        if maps.len() != modes {
            return Err(BlinError::Shape(format!("label map has {} modes, data has {modes}", maps.len())));
        }
    }
    let mut indexers: Vec<Indexer> =
        (0..modes).map(|m| Indexer::new(opts.label_maps.as_ref().map(|v| &v[m]))).collect();
    let t0 = records.iter().map(|r| r.t).min().unwrap();
    let t1 = records.iter().map(|r| r.t).max().unwrap();
    let horizon = (t1 - t0 + 1) as usize;

    let mut keyed = Vec::with_capacity(records.len());
    let mut seen = HashSet::with_capacity(records.len());
    for (n, r) in records.iter().enumerate() {
        if r.k.is_some() != (modes == 3) {
            return Err(BlinError::Parse { record: n + 1, message: "inconsistent number of modes".into() });
        }
        let mut idx = vec![indexers[0].index(&r.i, n + 1)?, indexers[1].index(&r.j, n + 1)?];
        if let Some(k) = &r.k {
            idx.push(indexers[2].index(k, n + 1)?);
        }
        let t = (r.t - t0) as usize;
        if !seen.insert((t, idx.clone())) {
            let k = r.k.as_deref().map(|k| format!(",{k}")).unwrap_or_default();
            return Err(BlinError::DuplicateKey(format!("({},{},{}{k})", r.t, r.i, r.j)));
        }
        keyed.push((t, idx, r.value));
    }
    let labels: Vec<Vec<String>> = indexers.into_iter().map(|x| x.order).collect();
    let dims: Vec<usize> = labels.iter().map(Vec::len).collect();
    let n: usize = dims.iter().product();
    let mut data = vec![0.0; n * horizon];
    for (t, idx, v) in keyed {
        let mut off = 0;
        let mut stride = 1;
        for (d, &m) in idx.iter().zip(&dims) {
            off += d * stride;
            stride *= m;
        }
        data[t * n + off] = v;
    }
    let filled = n * horizon - records.len();
    if opts.strict && filled > 0 {
        return Err(BlinError::InvalidConfig(format!("{filled} cells have no record")));
    }

    let mut series = TensorSeries::new(dims, horizon, data)?.with_labels(labels.clone())?;
    let mut transforms = Vec::new();
    if opts.standardize {
        series = series.standardize();
        transforms.push("standardize".to_string());
    } else if opts.center {
        series = series.center();
        transforms.push("center".to_string());
    }
    if opts.difference {
        series = series.difference()?;
        transforms.push("difference".to_string());
    }
    let report = IngestReport {
        records: records.len(),
        filled,
        labels,
        times: (t0..=t1).collect(),
        transforms,
    };
    Ok((series, report))
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<(TensorSeries, IngestReport)> {
    series_from_records(&read_long_records(reader)?, opts)
}

pub fn ingest(path: &Path, opts: &IngestOptions) -> Result<(TensorSeries, IngestReport)> {
    ingest_reader(open(path)?, opts)
}

/// `File::open` with the path in the error message.
pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Seventeen significant digits, enough to read back the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Two- or three-mode series as long CSV, one line per cell with time
/// indices `0..T`. Labels default to 0-based indices.
pub fn write_long_csv<W: Write>(series: &TensorSeries, w: W) -> Result<()> {
    let dims = series.dims();
    if !(2..=3).contains(&dims.len()) {
        return Err(BlinError::Shape(format!("long CSV holds two or three modes, got {}", dims.len())));
    }
    let labels: Vec<Vec<String>> = match series.labels() {
        Some(l) => l.to_vec(),
        None => dims.iter().map(|&d| (0..d).map(|x| x.to_string()).collect()).collect(),
    };
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t", "i", "j"];
    if dims.len() == 3 {
        header.push("k");
    }
    header.push("value");
    out.write_record(&header)?;
    let n = series.slice_len();
    for t in 0..series.horizon() {
        let slice = series.slice(t);
        for (c, v) in slice.iter().enumerate().take(n) {
            let mut rec = vec![t.to_string()];
            let mut rest = c;
            for (m, &d) in dims.iter().enumerate() {
                rec.push(labels[m][rest % d].clone());
                rest /= d;
            }
            rec.push(fmt_f64(*v));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn long_csv_string(series: &TensorSeries) -> Result<String> {
    let mut buf = Vec::new();
    write_long_csv(series, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Plain numeric CSV, one matrix row per line.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| BlinError::Parse { record: n + 1, message: format!("{f:?}: {e}") }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(BlinError::Shape("ragged matrix CSV".into()));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| BlinError::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
