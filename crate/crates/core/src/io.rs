//! File formats: trajectory CSV, system-spec JSON, result JSON and graph
//! edge-list CSV.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::WeightedDigraph;
use crate::recoverability::{ConditionPath, RecoverabilityReport};
use crate::systems::{JordanSpec, ObservedSeries, StepKind};

/// Render a complex number as `re+imj` (exact round-trip via shortest float
/// representation). Pure reals are written plain.
pub fn format_complex(z: c64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}j", z.re, -z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

/// Parse `re+imj`, `re-imj`, bare reals, or bare imaginaries like `2j`.
pub fn parse_complex(text: &str) -> Result<c64> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty complex literal".into()));
    }
    let bad = || Error::InvalidArgument(format!("cannot parse complex literal '{text}'"));
    if let Some(body) = s.strip_suffix(['j', 'i']) {
        // split at the last +/- that is not an exponent sign and not leading
        let bytes = body.as_bytes();
        let mut split = None;
        for p in (1..bytes.len()).rev() {
            let ch = bytes[p];
            if (ch == b'+' || ch == b'-')
                && !matches!(bytes[p - 1], b'e' | b'E')
            {
                split = Some(p);
                break;
            }
        }
        match split {
            Some(p) => {
                let re: f64 = body[..p].parse().map_err(|_| bad())?;
                let im_str = &body[p..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().map_err(|_| bad())?
                };
                Ok(c64::new(re, im))
            }
            None => {
                let im: f64 = if body.is_empty() { 1.0 } else { body.parse().map_err(|_| bad())? };
                Ok(c64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = s.parse().map_err(|_| bad())?;
        Ok(c64::new(re, 0.0))
    }
}

/// Write an observed series as CSV: header `t,i<k1>,i<k2>,...`, one row per
/// sample, complex entries as `re+imj`.
pub fn write_trajectory<W: Write>(series: &ObservedSeries, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(series.omega().iter().map(|i| format!("i{i}")));
    wtr.write_record(&header)?;
    let dt = match series.step_kind() {
        StepKind::Discrete => 1.0,
        StepKind::Continuous { dt } => dt,
    };
    for (row, sample) in series.samples().rows().into_iter().enumerate() {
        let mut rec = vec![format!("{}", row as f64 * dt)];
        rec.extend(sample.iter().map(|&z| format_complex(z)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trajectory_file(series: &ObservedSeries, path: &Path) -> Result<()> {
    write_trajectory(series, std::fs::File::create(path)?)
}

/// Read a trajectory CSV back into an observed series. The time column decides
/// the step kind: unit spacing from zero is discrete, anything else is
/// continuous with the observed spacing.
pub fn read_trajectory<R: Read>(input: R) -> Result<ObservedSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.get(0) != Some("t") {
        return Err(Error::InvalidArgument(
            "trajectory CSV must start with a 't' column".into(),
        ));
    }
    let mut omega = Vec::new();
    for field in header.iter().skip(1) {
        let idx: usize = field
            .strip_prefix('i')
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("bad trajectory column name '{field}'"))
            })?;
        omega.push(idx);
    }
    let mut times = Vec::new();
    let mut values: Vec<c64> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != omega.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "trajectory row has {} fields, expected {}",
                record.len(),
                omega.len() + 1
            )));
        }
        let t: f64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad time value '{}'", &record[0])))?;
        times.push(t);
        for field in record.iter().skip(1) {
            values.push(parse_complex(field)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData("trajectory needs at least 2 samples".into()));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::InvalidArgument("time column must be increasing".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InvalidArgument("non-uniform time grid".into()));
        }
    }
    let step = if (dt - 1.0).abs() < 1e-12 && times[0].abs() < 1e-12 {
        StepKind::Discrete
    } else {
        StepKind::Continuous { dt }
    };
    let samples = Array2::from_shape_vec((times.len(), omega.len()), values)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    ObservedSeries::new(omega, samples, step)
}

pub fn read_trajectory_file(path: &Path) -> Result<ObservedSeries> {
    read_trajectory(std::fs::File::open(path)?)
}

/// One complex number in JSON. Written as `{"re":..,"im":..}`; plain numbers
/// and `re+imj` strings are accepted on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexJson {
    Parts { re: f64, im: f64 },
    Real(f64),
    Literal(String),
}

impl ComplexJson {
    pub fn to_c64(&self) -> Result<c64> {
        match self {
            ComplexJson::Parts { re, im } => Ok(c64::new(*re, *im)),
            ComplexJson::Real(x) => Ok(c64::new(*x, 0.0)),
            ComplexJson::Literal(s) => parse_complex(s),
        }
    }

    pub fn from_c64(z: c64) -> Self {
        ComplexJson::Parts { re: z.re, im: z.im }
    }
}

/// On-disk system specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub eigenvalues: Vec<ComplexJson>,
    pub blocks: Vec<Vec<usize>>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<ComplexJson>>,
    pub b: Vec<ComplexJson>,
    pub c: Vec<ComplexJson>,
}

impl SpecFile {
    pub fn into_parts(self) -> Result<(JordanSpec, Array1<c64>, Array1<c64>)> {
        let eigenvalues: Vec<c64> =
            self.eigenvalues.iter().map(|z| z.to_c64()).collect::<Result<_>>()?;
        let d: usize = self.blocks.iter().flatten().sum();
        if self.u.len() != d || self.u.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch(format!("U must be {d}x{d}")));
        }
        let mut u = Array2::<c64>::zeros((d, d));
        for (i, row) in self.u.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                u[[i, j]] = z.to_c64()?;
            }
        }
        let spec = JordanSpec::new(eigenvalues, self.blocks, u)?;
        let b: Array1<c64> = self.b.iter().map(|z| z.to_c64()).collect::<Result<Vec<_>>>()?.into();
        let c: Array1<c64> = self.c.iter().map(|z| z.to_c64()).collect::<Result<Vec<_>>>()?.into();
        if b.len() != d || c.len() != d {
            return Err(Error::DimensionMismatch(format!("b and c must have length {d}")));
        }
        Ok((spec, b, c))
    }

    pub fn from_parts(spec: &JordanSpec, b: &Array1<c64>, c: &Array1<c64>) -> Self {
        let d = spec.dim();
        SpecFile {
            eigenvalues: spec.eigenvalues().iter().map(|&z| ComplexJson::from_c64(z)).collect(),
            blocks: spec.blocks().to_vec(),
            u: (0..d)
                .map(|i| (0..d).map(|j| ComplexJson::from_c64(spec.similarity()[[i, j]])).collect())
                .collect(),
            b: b.iter().map(|&z| ComplexJson::from_c64(z)).collect(),
            c: c.iter().map(|&z| ComplexJson::from_c64(z)).collect(),
        }
    }
}

pub fn read_spec_file(path: &Path) -> Result<(JordanSpec, Array1<c64>, Array1<c64>)> {
    let file: SpecFile = serde_json::from_reader(std::fs::File::open(path)?)?;
    file.into_parts()
}

pub fn write_spec_file(
    spec: &JordanSpec,
    b: &Array1<c64>,
    c: &Array1<c64>,
    path: &Path,
) -> Result<()> {
    let file = SpecFile::from_parts(spec, b, c);
    serde_json::to_writer_pretty(std::fs::File::create(path)?, &file)?;
    Ok(())
}

/// Result JSON for estimation runs.
pub fn estimate_to_json(
    est: &crate::estimators::SpectrumEstimate,
    rmse: Option<f64>,
    ine: Option<f64>,
) -> serde_json::Value {
    let eigenvalues: Vec<serde_json::Value> = est
        .eigenvalues
        .iter()
        .map(|z| serde_json::json!({"re": z.re, "im": z.im}))
        .collect();
    let mut diagnostics = serde_json::json!({
        "residual": est.residual,
        "discarded_near_zero": est.n_pruned,
        "tls_fallback": est.tls_fallback,
        "ill_posed": est.ill_posed,
    });
    if !est.ambiguous.is_empty() {
        diagnostics["ambiguous"] = serde_json::json!(est.ambiguous);
        diagnostics["dropped_zero"] = serde_json::json!(est.n_dropped_zero);
    }
    serde_json::json!({
        "method": est.method.as_str(),
        "r_hat": est.r_used,
        "eigenvalues": eigenvalues,
        "rmse": rmse,
        "ine": ine,
        "diagnostics": diagnostics,
    })
}

/// Recoverability report as JSON.
pub fn report_to_json(report: &RecoverabilityReport) -> serde_json::Value {
    let eigenvalues: Vec<serde_json::Value> = report
        .eigenvalues
        .iter()
        .map(|e| {
            serde_json::json!({
                "re": e.eigenvalue.re,
                "im": e.eigenvalue.im,
                "recoverable": e.recoverable,
                "local_degree": e.local_degree,
            })
        })
        .collect();
    let path = match report.path {
        ConditionPath::JordanExact => "jordan-exact",
        ConditionPath::NumericDiagonalizable => "numeric-diagonalizable",
        ConditionPath::DataDriven => "data-driven",
    };
    serde_json::json!({
        "omega": report.omega,
        "total_degree": report.total_degree,
        "path": path,
        "eigenvalues": eigenvalues,
    })
}

/// Write a weighted digraph as `src,dst,weight` with 1-based indices.
pub fn write_edge_list<W: Write>(graph: &WeightedDigraph, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["src", "dst", "weight"])?;
    let w = graph.adjacency();
    for i in 0..graph.vertex_count() {
        for j in 0..graph.vertex_count() {
            if w[[i, j]] != 0.0 {
                wtr.write_record(&[
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format!("{}", w[[i, j]]),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Read a `src,dst,weight` edge list; the vertex count is the largest index
/// seen unless a larger one is forced.
pub fn read_edge_list<R: Read>(input: R, min_vertices: Option<usize>) -> Result<WeightedDigraph> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut edges = Vec::new();
    let mut max_idx = min_vertices.unwrap_or(0);
    for record in rdr.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::InvalidArgument("edge rows must be src,dst,weight".into()));
        }
        let src: usize = record[0].trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("bad src index '{}'", &record[0]))
        })?;
        let dst: usize = record[1].trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("bad dst index '{}'", &record[1]))
        })?;
        let weight: f64 = record[2].trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("bad weight '{}'", &record[2]))
        })?;
        if src == 0 || dst == 0 {
            return Err(Error::InvalidArgument("edge indices are 1-based".into()));
        }
        if weight < 0.0 {
            return Err(Error::InvalidArgument("edge weights must be nonnegative".into()));
        }
        max_idx = max_idx.max(src).max(dst);
        edges.push((src - 1, dst - 1, weight));
    }
    let mut w = Array2::<f64>::zeros((max_idx, max_idx));
    for (i, j, weight) in edges {
        w[[i, j]] = weight;
    }
    WeightedDigraph::new(w)
}

pub fn read_edge_list_file(path: &Path) -> Result<WeightedDigraph> {
    read_edge_list(std::fs::File::open(path)?, None)
}

/// Load a plain numeric matrix CSV (optional header row is skipped).
pub fn read_matrix_csv<R: Read>(input: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                match width {
                    None => width = Some(vals.len()),
                    Some(w) if w != vals.len() => {
                        return Err(Error::InvalidArgument(format!(
                            "ragged CSV: row {line} has {} fields, expected {w}",
                            vals.len()
                        )));
                    }
                    _ => {}
                }
                rows.push(vals);
            }
            Err(_) if rows.is_empty() => continue, // header row
            Err(_) => {
                return Err(Error::InvalidArgument(format!(
                    "non-numeric value in CSV row {line}"
                )));
            }
        }
    }
    let width = width.ok_or(Error::InsufficientData("empty CSV".into()))?;
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn read_matrix_csv_file(path: &Path) -> Result<Array2<f64>> {
    read_matrix_csv(std::fs::File::open(path)?)
}
