//! Plot-ready diagnostic files for transformed waiting times.
//!
//! `write_diagnostics` produces three files in one directory:
//! `qq.csv` (`i,empirical,theoretical`), `acf.csv`
//! (`lag,acf,acf_squared,band`) and `diagnostics.json`.
//! `check_diagnostics` validates such a directory.

use std::fs;
use std::path::{Path, PathBuf};

use hawkesboot_core::diagnostics::{acf, ks_exp1, qq_pairs, squares};

use crate::report::{DiagnoseConfig, DiagnosticsOutput, KsDoc, ParamsDoc, SCHEMA_VERSION};

pub const QQ_FILE: &str = "qq.csv";
pub const ACF_FILE: &str = "acf.csv";
pub const SUMMARY_FILE: &str = "diagnostics.json";
pub const QQ_COLUMNS: [&str; 3] = ["i", "empirical", "theoretical"];
pub const ACF_COLUMNS: [&str; 4] = ["lag", "acf", "acf_squared", "band"];

#[derive(Debug, thiserror::Error)]
pub enum DiagnoseError {
    #[error("{0}")]
    Core(#[from] hawkesboot_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

/// Default lag window: 20, or fewer for short series.
pub fn default_max_lag(n: usize) -> usize {
    20.min(n.saturating_sub(1))
}

pub struct Diagnostics {
    pub summary: DiagnosticsOutput,
    pub qq: Vec<(f64, f64)>,
    pub acf: Vec<f64>,
    pub acf_squared: Vec<f64>,
}

pub fn diagnose(values: &[f64], config: DiagnoseConfig, theta: Option<ParamsDoc>) -> Result<Diagnostics, DiagnoseError> {
    let ks = ks_exp1(values)?;
    let r = acf(values, config.max_lag)?;
    let r2 = acf(&squares(values), config.max_lag)?;
    let summary = DiagnosticsOutput {
        schema_version: SCHEMA_VERSION,
        config,
        theta,
        n: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ks: KsDoc {
            statistic: ks.statistic,
            p_value: ks.p_value,
            n: ks.n,
        },
        band: r.band,
        acf_outside_band: r.outside_band(),
        acf_squared_outside_band: r2.outside_band(),
        files: vec![QQ_FILE.into(), ACF_FILE.into(), SUMMARY_FILE.into()],
    };
    Ok(Diagnostics {
        summary,
        qq: qq_pairs(values),
        acf: r.values,
        acf_squared: r2.values,
    })
}

fn write(path: PathBuf, text: String) -> Result<(), DiagnoseError> {
    fs::write(&path, text).map_err(|source| DiagnoseError::Io { path, source })
}

pub fn write_diagnostics(dir: &Path, d: &Diagnostics) -> Result<(), DiagnoseError> {
    fs::create_dir_all(dir).map_err(|source| DiagnoseError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut qq = QQ_COLUMNS.join(",") + "\n";
    for (i, (e, t)) in d.qq.iter().enumerate() {
        qq.push_str(&format!("{},{e:e},{t:e}\n", i + 1));
    }
    write(dir.join(QQ_FILE), qq)?;
    let mut ac = ACF_COLUMNS.join(",") + "\n";
    for (lag, (r, r2)) in d.acf.iter().zip(&d.acf_squared).enumerate() {
        ac.push_str(&format!("{lag},{r:e},{r2:e},{:e}\n", d.summary.band));
    }
    write(dir.join(ACF_FILE), ac)?;
    let json = serde_json::to_string_pretty(&d.summary).expect("serializable");
    write(dir.join(SUMMARY_FILE), json + "\n")
}

fn schema(path: &Path, message: impl Into<String>) -> DiagnoseError {
    DiagnoseError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, DiagnoseError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| schema(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| schema(path, e.to_string()))?;
    if !header.iter().eq(columns.iter().copied()) {
        return Err(schema(path, format!("expected columns {columns:?}, found {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(path, e.to_string()))?;
        let row: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = row.map_err(|_| schema(path, format!("row {} is not numeric", i + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(schema(path, format!("row {} is not finite", i + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Checks column layout, row counts against the summary, monotone QQ
/// coordinates, `acf(0) = 1` and `|acf| ≤ 1`.
pub fn check_diagnostics(dir: &Path) -> Result<DiagnosticsOutput, DiagnoseError> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(|source| DiagnoseError::Io {
        path: summary_path.clone(),
        source,
    })?;
    let summary: DiagnosticsOutput = serde_json::from_str(&text).map_err(|e| schema(&summary_path, e.to_string()))?;
    if summary.schema_version != SCHEMA_VERSION {
        return Err(schema(&summary_path, format!("schema_version {}", summary.schema_version)));
    }
    if !(0.0..=1.0).contains(&summary.ks.p_value) {
        return Err(schema(&summary_path, "KS p-value outside [0, 1]"));
    }

    let qq_path = dir.join(QQ_FILE);
    let qq = read_table(&qq_path, &QQ_COLUMNS)?;
    if qq.len() != summary.n {
        return Err(schema(&qq_path, format!("{} rows for n = {}", qq.len(), summary.n)));
    }
    if qq.windows(2).any(|w| w[1][1] < w[0][1] || w[1][2] < w[0][2]) {
        return Err(schema(&qq_path, "quantiles not sorted"));
    }

    let acf_path = dir.join(ACF_FILE);
    let ac = read_table(&acf_path, &ACF_COLUMNS)?;
    if ac.len() != summary.config.max_lag + 1 {
        return Err(schema(&acf_path, format!("{} rows for max lag {}", ac.len(), summary.config.max_lag)));
    }
    if ac[0][1] != 1.0 || ac[0][2] != 1.0 {
        return Err(schema(&acf_path, "lag 0 autocorrelation is not one"));
    }
    if ac.iter().any(|r| r[1].abs() > 1.0 || r[2].abs() > 1.0) {
        return Err(schema(&acf_path, "autocorrelation outside [-1, 1]"));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(max_lag: usize) -> DiagnoseConfig {
        DiagnoseConfig {
            data: None,
            pre_sample: None,
            residuals: Some("r.txt".into()),
            kernel: None,
            theta: None,
            max_lag,
        }
    }

    #[test]
    fn written_files_pass_the_check() {
        let values: Vec<f64> = (0..50).map(|i| -((i as f64 + 0.5) / 50.0).ln() * (1.0 + 0.1 * (i % 3) as f64)).collect();
        let d = diagnose(&values, config(10), None).unwrap();
        let dir = std::env::temp_dir().join(format!("hawkesboot-diag-{}", std::process::id()));
        write_diagnostics(&dir, &d).unwrap();
        let s = check_diagnostics(&dir).unwrap();
        assert_eq!(s.n, 50);

        fs::write(dir.join(ACF_FILE), "lag,acf\n0,1\n").unwrap();
        assert!(matches!(check_diagnostics(&dir), Err(DiagnoseError::Schema { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn constant_series_is_rejected() {
        assert!(diagnose(&[1.0; 10], config(3), None).is_err());
        assert!(diagnose(&[], config(0), None).is_err());
    }
}
