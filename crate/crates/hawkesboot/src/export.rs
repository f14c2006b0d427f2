//! CSV and aligned-text renderings of Monte Carlo reports.
//!
//! The CSV holds one rate per row. The text layout groups models in panels
//! of three, with one column per (model, target) and one row per
//! (horizon, method); rates are printed as percentages.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::montecarlo::{McReport, RateRow, ELLIPSOID_TARGETS, INTERVAL_TARGETS, LR_TARGET};

/// Column order of the rates CSV.
pub const CSV_COLUMNS: [&str; 8] = ["model", "horizon", "method", "target", "rate", "mc_se", "valid", "attempted"];

pub fn write_rates_csv<W: Write>(report: &McReport, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in report.rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rates_csv(report: &McReport) -> String {
    let mut buf = Vec::new();
    write_rates_csv(report, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn read_rates_csv<R: Read>(input: R) -> csv::Result<Vec<RateRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Which family of rates a text table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Intervals,
    Ellipsoids,
    LrSize,
}

impl TableKind {
    pub const ALL: [TableKind; 3] = [TableKind::Intervals, TableKind::Ellipsoids, TableKind::LrSize];

    pub fn targets(self) -> &'static [&'static str] {
        match self {
            TableKind::Intervals => &INTERVAL_TARGETS,
            TableKind::Ellipsoids => &ELLIPSOID_TARGETS,
            TableKind::LrSize => std::slice::from_ref(&LR_TARGET),
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TableKind::Intervals => "Coverage of confidence intervals (%)",
            TableKind::Ellipsoids => "Coverage of confidence ellipsoids (%)",
            TableKind::LrSize => "Rejection frequency of the LR test (%)",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            TableKind::Intervals => "intervals",
            TableKind::Ellipsoids => "ellipsoids",
            TableKind::LrSize => "lr_size",
        }
    }

    fn header(target: &str) -> &str {
        match target {
            "ce_theta" => "theta",
            "ce_theta_tilde" => "theta~",
            "lr_size" => "size",
            t => t,
        }
    }
}

fn methods(report: &McReport) -> Vec<String> {
    let mut out = vec!["asym".to_string()];
    out.extend(report.config.schemes.iter().map(|s| s.to_ascii_lowercase()));
    out
}

/// Aligned text table; missing rates print as `-`.
pub fn render_text(report: &McReport, kind: TableKind) -> String {
    let targets = kind.targets();
    let methods = methods(report);
    let mut out = String::new();
    writeln!(out, "{}", kind.title()).unwrap();
    for panel in report.config.models.chunks(3) {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut top = vec![String::new(), String::new()];
        let mut sub = vec![String::new(), String::new()];
        for m in panel {
            for (k, t) in targets.iter().enumerate() {
                top.push(if k == 0 { m.label.clone() } else { String::new() });
                sub.push(TableKind::header(t).to_string());
            }
        }
        rows.push(top);
        rows.push(sub);
        for &horizon in &report.config.horizons {
            for (j, method) in methods.iter().enumerate() {
                let mut row = vec![
                    if j == 0 { format!("T={horizon}") } else { String::new() },
                    method.to_uppercase(),
                ];
                for m in panel {
                    for t in targets {
                        row.push(match report.rate(&m.label, horizon, method, t) {
                            Some(r) if r.rate.is_finite() => format!("{:.1}", 100.0 * r.rate),
                            _ => "-".to_string(),
                        });
                    }
                }
                rows.push(row);
            }
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        out.push('\n');
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| if c < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
    }
    out
}

/// Per-cell bookkeeping: attempts, sanity failures and discards.
pub fn render_summary(report: &McReport) -> String {
    let mut out = String::new();
    writeln!(out, "model  T  attempted  valid  sc_fail  sc_rate  opt_fail  discards  note").unwrap();
    for c in &report.cells {
        let discards: usize = c.bootstrap_discards.values().sum();
        writeln!(
            out,
            "{}  {}  {}  {}  {}  {:.3}  {}  {}  {}",
            c.model,
            c.horizon,
            c.attempted,
            c.valid,
            c.sanity_failures,
            c.sanity_failure_rate,
            c.optimizer_failures,
            discards,
            c.error.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{CellReport, McConfig, ModelSpec, SCHEMA_VERSION};

    fn report(rows: Vec<RateRow>) -> McReport {
        let cfg = McConfig {
            models: vec![ModelSpec::new("2B", 0.5, 2.5, 5.0)],
            horizons: vec![100.0],
            schemes: vec!["prfb".into()],
            ..McConfig::default()
        };
        McReport {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            cells: vec![CellReport {
                model: "2B".into(),
                horizon: 100.0,
                attempted: 3,
                valid: 2,
                sanity_failures: 1,
                optimizer_failures: 0,
                sanity_failure_rate: 1.0 / 3.0,
                bootstrap_discards: Default::default(),
                bootstrap_failures: Default::default(),
                error: None,
                rows,
                wall_time: 0.0,
            }],
        }
    }

    fn row(method: &str, target: &str, rate: f64) -> RateRow {
        RateRow {
            model: "2B".into(),
            horizon: 100.0,
            method: method.into(),
            target: target.into(),
            rate,
            mc_se: (rate * (1.0 - rate) / 2.0).sqrt(),
            valid: 2,
            attempted: 3,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = rates_csv(&report(Vec::new()));
        assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
        assert!(read_rates_csv(csv.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let rows = vec![row("asym", "mu", 0.5), row("prfb", "beta", 1.0), row("prfb", "lr_size", 0.1 + 0.2)];
        let r = report(rows.clone());
        let back = read_rates_csv(rates_csv(&r).as_bytes()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn text_layout() {
        let r = report(vec![row("asym", "mu", 0.5), row("prfb", "mu", 1.0)]);
        let text = render_text(&r, TableKind::Intervals);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TableKind::Intervals.title());
        assert!(lines[2].contains("2B"));
        assert!(lines[3].split_whitespace().eq(["mu", "alpha", "beta", "a"]));
        assert!(lines[4].starts_with("T=100"));
        assert!(lines[4].split_whitespace().eq(["T=100", "ASYM", "50.0", "-", "-", "-"]));
        assert!(lines[5].split_whitespace().eq(["PRFB", "100.0", "-", "-", "-"]));
    }
}
