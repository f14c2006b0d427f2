//! Event-time files.
//!
//! One strictly increasing time per line, or CSV with a header containing
//! a `t` column. Lines starting with `#` are comments; `# horizon = <T>`
//! records the observation horizon. Pre-sample history (negative times)
//! lives in a sibling file `<stem>.presample.txt` in the same format.

use std::fs;
use std::path::{Path, PathBuf};

use hawkesboot_core::EventSeries;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: cannot parse `{text}` as a time")]
    Parse { path: PathBuf, line: usize, text: String },
    #[error("{path}:{line}: time {value} is not after the previous time {previous}")]
    NotIncreasing {
        path: PathBuf,
        line: usize,
        value: f64,
        previous: f64,
    },
    #[error("{path}:{line}: duplicate time {value}")]
    Duplicate { path: PathBuf, line: usize, value: f64 },
    #[error("{path}: no `t` column in CSV header")]
    MissingColumn { path: PathBuf },
    #[error("{path}: bad horizon directive `{text}`")]
    Horizon { path: PathBuf, text: String },
    #[error("{path}: no event times")]
    Empty { path: PathBuf },
    #[error("{0}")]
    Series(#[from] hawkesboot_core::Error),
}

/// Parsed contents of an event file.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub times: Vec<f64>,
    pub horizon: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_event_file(path: &Path) -> Result<EventFile, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_event_text(&text, path)
}

pub fn parse_event_text(text: &str, path: &Path) -> Result<EventFile, IngestError> {
    parse_lines(text, path, true)
}

/// Values in the event-file format without the ordering requirement, e.g.
/// transformed waiting times.
pub fn read_value_file(path: &Path) -> Result<Vec<f64>, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let values = parse_lines(&text, path, false)?.times;
    if values.is_empty() {
        return Err(IngestError::Empty { path: path.to_path_buf() });
    }
    Ok(values)
}

fn parse_lines(text: &str, path: &Path, ordered: bool) -> Result<EventFile, IngestError> {
    let mut times = Vec::new();
    let mut horizon = None;
    let mut column: Option<usize> = None;
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "horizon" {
                    let v = value.trim();
                    horizon = Some(v.parse::<f64>().map_err(|_| IngestError::Horizon {
                        path: path.to_path_buf(),
                        text: v.to_string(),
                    })?);
                }
            }
            continue;
        }
        if !seen_data && trimmed.parse::<f64>().is_err() {
            // header row: locate the `t` column
            let idx = trimmed.split(',').position(|c| c.trim() == "t");
            column = Some(idx.ok_or_else(|| IngestError::MissingColumn { path: path.to_path_buf() })?);
            seen_data = true;
            continue;
        }
        seen_data = true;
        let field = match column {
            Some(c) => trimmed.split(',').nth(c).unwrap_or("").trim(),
            None => trimmed,
        };
        let value: f64 = field.parse().map_err(|_| IngestError::Parse {
            path: path.to_path_buf(),
            line,
            text: field.to_string(),
        })?;
        if !value.is_finite() {
            return Err(IngestError::Parse {
                path: path.to_path_buf(),
                line,
                text: field.to_string(),
            });
        }
        if let Some(&previous) = times.last().filter(|_| ordered) {
            if value == previous {
                return Err(IngestError::Duplicate {
                    path: path.to_path_buf(),
                    line,
                    value,
                });
            }
            if value < previous {
                return Err(IngestError::NotIncreasing {
                    path: path.to_path_buf(),
                    line,
                    value,
                    previous,
                });
            }
        }
        times.push(value);
    }
    Ok(EventFile { times, horizon })
}

/// `<dir>/<stem>.presample.txt` next to `data`.
pub fn presample_sibling(data: &Path) -> PathBuf {
    let stem = data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    data.with_file_name(format!("{stem}.presample.txt"))
}

/// Load a series: the horizon comes from `horizon`, else the file's
/// directive, else the last event time. Pre-sample history is read from
/// `presample` or, when absent, from the sibling file if it exists.
pub fn load_series(data: &Path, presample: Option<&Path>, horizon: Option<f64>) -> Result<EventSeries, IngestError> {
    let file = read_event_file(data)?;
    if file.times.is_empty() {
        return Err(IngestError::Empty { path: data.to_path_buf() });
    }
    let pre = match presample {
        Some(p) => read_event_file(p)?.times,
        None => {
            let sibling = presample_sibling(data);
            if sibling.exists() {
                read_event_file(&sibling)?.times
            } else {
                Vec::new()
            }
        }
    };
    let horizon = horizon
        .or(file.horizon)
        .unwrap_or_else(|| *file.times.last().expect("non-empty"));
    Ok(EventSeries::new(pre, file.times, horizon)?)
}

pub fn format_times(times: &[f64], horizon: Option<f64>) -> String {
    let mut out = String::with_capacity(24 * (times.len() + 1));
    if let Some(t) = horizon {
        out.push_str(&format!("# horizon = {t:.16e}\n"));
    }
    for t in times {
        out.push_str(&format!("{t:.16e}\n"));
    }
    out
}

/// Write the sample events to `path` and, when present, the pre-sample
/// history to the sibling file.
pub fn write_series(path: &Path, series: &EventSeries) -> Result<(), IngestError> {
    fs::write(path, format_times(series.events(), Some(series.horizon()))).map_err(io_err(path))?;
    if !series.pre_sample().is_empty() {
        let sibling = presample_sibling(path);
        fs::write(&sibling, format_times(series.pre_sample(), None)).map_err(io_err(&sibling))?;
    }
    Ok(())
}
