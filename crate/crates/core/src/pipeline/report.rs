use std::fmt::Write as _;
use std::str::FromStr;

use crate::classify::EvaluationReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidParameter(format!("unknown format `{s}`; supported: text, csv, json"))),
        }
    }
}

/// Renders an evaluation.
///
/// * text: accuracy line, aligned confusion matrix, per-class precision and recall
/// * csv: the confusion matrix only, header `true\predicted,<classes...>`
///   followed by one row per true class
/// * json: the whole report
pub fn show_results(report: &EvaluationReport, format: OutputFormat) -> String {
    let mut s = String::new();
    match format {
        OutputFormat::Text => {
            let width = report.classes.iter().map(String::len).max().unwrap_or(0).max(6);
            writeln!(s, "accuracy: {:.4} ({}/{})", report.accuracy, report.correct(), report.total()).unwrap();
            writeln!(s, "confusion (rows = true, columns = predicted):").unwrap();
            write!(s, "{:width$}", "").unwrap();
            for c in &report.classes {
                write!(s, " {c:>width$}").unwrap();
            }
            s.push('\n');
            for (c, row) in report.classes.iter().zip(&report.confusion) {
                write!(s, "{c:width$}").unwrap();
                for n in row {
                    write!(s, " {n:>width$}").unwrap();
                }
                s.push('\n');
            }
            writeln!(s, "{:width$} {:>9} {:>9}", "class", "precision", "recall").unwrap();
            for (i, c) in report.classes.iter().enumerate() {
                writeln!(s, "{c:width$} {:>9.4} {:>9.4}", report.precision[i], report.recall[i]).unwrap();
            }
        }
        OutputFormat::Csv => {
            s.push_str("true\\predicted");
            for c in &report.classes {
                write!(s, ",{c}").unwrap();
            }
            s.push('\n');
            for (c, row) in report.classes.iter().zip(&report.confusion) {
                s.push_str(c);
                for n in row {
                    write!(s, ",{n}").unwrap();
                }
                s.push('\n');
            }
        }
        OutputFormat::Json => {
            s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::evaluate;

    fn report() -> EvaluationReport {
        let classes: Vec<String> = ["CR", "HA", "PO"].iter().map(|s| s.to_string()).collect();
        evaluate(&["CR", "HA", "PO", "PO"], &["CR", "HA", "PO", "PO"], &classes).unwrap()
    }

    #[test]
    fn three_formats() {
        let r = report();
        assert!(show_results(&r, OutputFormat::Text).contains("accuracy: 1.0000"));
        let csv = show_results(&r, OutputFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 4);
        assert_eq!(lines[3], "PO,0,0,2");
        let json = show_results(&r, OutputFormat::Json);
        assert_eq!(serde_json::from_str::<EvaluationReport>(&json).unwrap(), r);
    }

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
