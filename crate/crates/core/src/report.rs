//! File formats: instance matrices, risk tables and lemma tables as CSV,
//! and JSON sidecars.
//!
//! All floating-point output uses 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly, so a fixed config and seed produce byte-stable
//! files. Wall-clock timing is the one non-reproducible column; writers take
//! a [`TimingMode`] so byte-stable output can zero it.

use std::fs;
use std::path::Path;

use crate::bounds::LemmaCheck;
use crate::harness::{RiskReport, RiskRow};
use crate::model::{CoreError, Matrix, SparsityPattern};

/// 17-significant-digit scientific formatting; exact for `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Whether CSV rows carry measured wall time or a stable zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingMode {
    Measured,
    Zeroed,
}

/// Instance-file header: `# p n s sigma seed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixHeader {
    pub p: usize,
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    pub seed: u64,
}

/// Serializes a matrix column-major: two comment lines (field names, then
/// values), then one CSV line per column.
pub fn matrix_to_csv(m: &Matrix, header: &MatrixHeader) -> String {
    let mut out = String::new();
    out.push_str("# p n s sigma seed\n");
    out.push_str(&format!(
        "# {} {} {} {} {}\n",
        header.p,
        header.n,
        header.s,
        format_float(header.sigma),
        header.seed
    ));
    for col in m.columns() {
        let line: Vec<String> = col.iter().map(|v| format_float(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix, header: &MatrixHeader) -> Result<(), CoreError> {
    fs::write(path, matrix_to_csv(m, header))?;
    Ok(())
}

/// Parses the column-major instance format back into a matrix and header.
pub fn read_matrix(path: &Path) -> Result<(Matrix, MatrixHeader), CoreError> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<(Matrix, MatrixHeader), CoreError> {
    let mut header: Option<MatrixHeader> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let fields: Vec<&str> = comment.split_whitespace().collect();
            if fields.len() == 5 && header.is_none() && fields[0] != "p" {
                header = Some(MatrixHeader {
                    p: parse_field(fields[0], lineno)?,
                    n: parse_field(fields[1], lineno)?,
                    s: parse_field(fields[2], lineno)?,
                    sigma: parse_field(fields[3], lineno)?,
                    seed: parse_field(fields[4], lineno)?,
                });
            }
            continue;
        }
        let column: Result<Vec<f64>, CoreError> = line
            .split(',')
            .map(|tok| parse_field::<f64>(tok.trim(), lineno))
            .collect();
        columns.push(column?);
    }
    let header = header.ok_or(CoreError::Parse {
        line: 0,
        message: "missing `# p n s sigma seed` header".into(),
    })?;
    let matrix = Matrix::from_columns(&columns)?;
    if matrix.rows() != header.p || matrix.cols() != header.n {
        return Err(CoreError::Parse {
            line: 0,
            message: format!(
                "header promises {}x{}, data is {}x{}",
                header.p,
                header.n,
                matrix.rows(),
                matrix.cols()
            ),
        });
    }
    Ok((matrix, header))
}

fn parse_field<T: std::str::FromStr>(token: &str, lineno: usize) -> Result<T, CoreError> {
    token.parse().map_err(|_| CoreError::Parse {
        line: lineno + 1,
        message: format!("cannot parse {token:?}"),
    })
}

/// One line of 1-based support indices.
pub fn support_to_csv(support: &SparsityPattern) -> String {
    let ids: Vec<String> = support.one_based().iter().map(usize::to_string).collect();
    format!("# support (1-based)\n{}\n", ids.join(","))
}

/// `p`-vector as a single CSV line with exact float formatting.
pub fn vector_to_csv_line(v: &[f64]) -> String {
    let fields: Vec<String> = v.iter().map(|x| format_float(*x)).collect();
    fields.join(",")
}

pub const RISK_CSV_HEADER: &str =
    "estimator,p,n,s,sigma,trials,mse,stderr,bound,violation_rate,wall_ms";

/// Serializes risk rows with the fixed column contract.
pub fn risk_rows_to_csv(rows: &[RiskRow], timing: TimingMode) -> String {
    let mut out = String::from(RISK_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        let bound = r.deviation_bound.map(format_float).unwrap_or_default();
        let violation = r.violation_rate.map(format_float).unwrap_or_default();
        let wall = match timing {
            TimingMode::Measured => r.wall_time_ms,
            TimingMode::Zeroed => 0,
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.estimator_id,
            row.p,
            row.n,
            row.s,
            format_float(row.sigma),
            r.trials,
            format_float(r.mean_sq_error),
            format_float(r.std_error),
            bound,
            violation,
            wall
        ));
    }
    out
}

/// Parses a risk CSV produced by [`risk_rows_to_csv`].
pub fn parse_risk_csv(text: &str) -> Result<Vec<RiskRow>, CoreError> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || lineno == 0 {
            if lineno == 0 && line != RISK_CSV_HEADER {
                return Err(CoreError::Parse {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(CoreError::Parse {
                line: lineno + 1,
                message: format!("expected 11 columns, got {}", fields.len()),
            });
        }
        let optional = |tok: &str, lineno: usize| -> Result<Option<f64>, CoreError> {
            if tok.is_empty() {
                Ok(None)
            } else {
                parse_field::<f64>(tok, lineno).map(Some)
            }
        };
        rows.push(RiskRow {
            p: parse_field(fields[1], lineno)?,
            n: parse_field(fields[2], lineno)?,
            s: parse_field(fields[3], lineno)?,
            sigma: parse_field(fields[4], lineno)?,
            report: RiskReport {
                estimator_id: fields[0].to_string(),
                trials: parse_field(fields[5], lineno)?,
                mean_sq_error: parse_field(fields[6], lineno)?,
                std_error: parse_field(fields[7], lineno)?,
                deviation_bound: optional(fields[8], lineno)?,
                violation_rate: optional(fields[9], lineno)?,
                wall_time_ms: parse_field(fields[10], lineno)?,
            },
        });
    }
    Ok(rows)
}

/// Lemma verification table.
pub fn lemma_checks_to_csv(checks: &[LemmaCheck]) -> String {
    let mut out = String::from("check,observed,allowed,trials,holds\n");
    for c in checks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name,
            format_float(c.observed),
            format_float(c.allowed),
            c.trials,
            c.holds
        ));
    }
    out
}

/// Writes the fully resolved run configuration next to an output file so
/// every table stays re-derivable. The sidecar lands at
/// `<output>.config.json`.
pub fn write_sidecar(output: &Path, resolved: &serde_json::Value) -> Result<(), CoreError> {
    let mut sidecar = output.as_os_str().to_owned();
    sidecar.push(".config.json");
    let text = serde_json::to_string_pretty(resolved).map_err(|e| CoreError::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    fs::write(sidecar, text)?;
    Ok(())
}
