//! Curves produced by the experiments and their CSV form.
//!
//! Layout: optional `# key: value` lines, then the header
//! `x, a, a_trials, a_ci95, b, …`, then one row per grid point. Floats are
//! written as `{:.8e}` (nine significant digits), so output is
//! byte-identical for identical inputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One named series on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub trials: Vec<u64>,
    /// 95% confidence half-width (normal approximation), 0 for exact values.
    pub ci95: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Series {
            name: name.into(),
            values: Vec::new(),
            trials: Vec::new(),
            ci95: Vec::new(),
        }
    }

    pub fn push(&mut self, value: f64, trials: u64, ci95: f64) {
        self.values.push(value);
        self.trials.push(trials);
        self.ci95.push(ci95);
    }

    /// Appends an error rate with its binomial half-width.
    pub fn push_rate(&mut self, errors: u64, events: u64, trials: u64) {
        let p = if events == 0 { 0.0 } else { errors as f64 / events as f64 };
        self.push(p, trials, binomial_ci95(p, events));
    }
}

/// `1.96·√(p(1−p)/n)`.
pub fn binomial_ci95(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// An x grid, the series evaluated on it and free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveResult {
    pub x_name: String,
    pub x_values: Vec<f64>,
    pub series: Vec<Series>,
    pub meta: Vec<(String, String)>,
}

impl CurveResult {
    pub fn new(x_name: impl Into<String>, x_values: Vec<f64>) -> Self {
        CurveResult {
            x_name: x_name.into(),
            x_values,
            series: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Checks that every series covers the grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.x_values.len();
        for s in &self.series {
            for (what, len) in [("values", s.values.len()), ("trials", s.trials.len()), ("ci95", s.ci95.len())] {
                if len != n {
                    return Err(Error::invalid(format!(
                        "series `{}` has {len} {what} for a grid of {n}",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Nine-significant-digit float formatting used in every CSV.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.8e}")
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `result` as CSV to `w`.
pub fn write_csv<W: Write>(result: &CurveResult, w: W) -> Result<()> {
    result.validate()?;
    let path = Path::new("<stream>");
    let mut w = BufWriter::new(w);
    for (k, v) in &result.meta {
        writeln!(w, "# {}: {}", k, v.replace('\n', " ")).map_err(io_err(path))?;
    }
    let mut cw = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec![result.x_name.clone()];
    for s in &result.series {
        header.push(s.name.clone());
        header.push(format!("{}_trials", s.name));
        header.push(format!("{}_ci95", s.name));
    }
    cw.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, &x) in result.x_values.iter().enumerate() {
        let mut row = vec![format_float(x)];
        for s in &result.series {
            row.push(format_float(s.values[i]));
            row.push(s.trials[i].to_string());
            row.push(format_float(s.ci95[i]));
        }
        cw.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    cw.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes `result` to `path`, replacing any existing file.
pub fn export_csv(result: &CurveResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(result, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        Error::Csv { message, .. } => Error::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

fn parse_float(path: &Path, s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| csv_err(path, format!("`{s}` is not a number"))),
    }
}

/// Reads a file written by [`export_csv`].
pub fn read_csv(path: &Path) -> Result<CurveResult> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| csv_err(path, format!("malformed metadata line `{line}`")))?;
            meta.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.is_empty() || (header.len() - 1) % 3 != 0 {
        return Err(csv_err(path, "header must be x followed by triples of columns"));
    }
    let mut result = CurveResult::new(&header[0], Vec::new());
    result.meta = meta;
    for i in (1..header.len()).step_by(3) {
        let name = &header[i];
        if header[i + 1] != format!("{name}_trials") || header[i + 2] != format!("{name}_ci95") {
            return Err(csv_err(path, format!("columns for `{name}` are not name, name_trials, name_ci95")));
        }
        result.series.push(Series::new(name));
    }
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        result.x_values.push(parse_float(path, &rec[0])?);
        for (j, s) in result.series.iter_mut().enumerate() {
            let base = 1 + 3 * j;
            let trials = rec[base + 1]
                .parse()
                .map_err(|_| csv_err(path, format!("bad trial count `{}`", &rec[base + 1])))?;
            s.push(
                parse_float(path, &rec[base])?,
                trials,
                parse_float(path, &rec[base + 2])?,
            );
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(0.1), "1.00000000e-1");
        assert_eq!(format_float(-1234.5678912), "-1.23456789e3");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn empty_grid_is_header_only() {
        let mut r = CurveResult::new("speed", vec![]);
        r.series.push(Series::new("ber"));
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "speed,ber,ber_trials,ber_ci95\n");
    }

    #[test]
    fn ragged_series_rejected() {
        let mut r = CurveResult::new("x", vec![1.0, 2.0]);
        let mut s = Series::new("y");
        s.push(1.0, 1, 0.0);
        r.series.push(s);
        assert!(r.validate().is_err());
    }

    #[test]
    fn ci_is_binomial() {
        assert!((binomial_ci95(0.5, 100) - 0.098).abs() < 1e-12);
        assert_eq!(binomial_ci95(0.0, 100), 0.0);
    }
}
