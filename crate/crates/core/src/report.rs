//! Plain-text renderings of reports.

use std::fmt::Write;

use crate::pipeline::{CvReport, DetectReport, MetricRow, MultirefRow};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

const HEADER: &str = "PPS↑ UPS↑ NLL↓ ECE↓ Sha.↓";

fn header_line(label_width: usize, label: &str) -> String {
    let mut line = format!("{label:<label_width$}");
    for h in HEADER.split(' ') {
        write!(line, " {h:>9}").unwrap();
    }
    line.push_str("         n");
    line
}

fn row_line(label_width: usize, label: &str, row: &MetricRow) -> String {
    let mut line = format!("{label:<label_width$}");
    for v in [
        Some(row.pps),
        row.ups,
        row.nll,
        Some(row.ece),
        row.sharpness,
    ] {
        write!(line, " {:>9}", cell(v)).unwrap();
    }
    write!(line, " {:>9}", row.n_segments).unwrap();
    line
}

pub fn cv_table(report: &CvReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# method={} k={} seed={} refs={} ece_bins={}",
        serde_json::to_value(report.method)
            .unwrap()
            .as_str()
            .unwrap_or("?"),
        report.k,
        report.seed,
        report.refs,
        report.ece_bins
    )
    .unwrap();
    writeln!(out, "# mean row: {}", report.combination).unwrap();
    if !report.system_coverage_complete {
        writeln!(out, "# warning: some folds miss at least one system").unwrap();
    }
    let w = 8;
    writeln!(out, "{}", header_line(w, "fold")).unwrap();
    for f in &report.folds {
        writeln!(out, "{}", row_line(w, &f.fold.to_string(), &f.metrics)).unwrap();
    }
    writeln!(out, "{}", row_line(w, "mean", &report.mean)).unwrap();
    out
}

pub fn multiref_table(rows: &[MultirefRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        writeln!(
            out,
            "# k={} seed={} ece_bins={} (mean over folds)",
            first.report.k, first.report.seed, first.report.ece_bins
        )
        .unwrap();
    }
    let w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
    writeln!(out, "{}", header_line(w, "pattern")).unwrap();
    for r in rows {
        writeln!(out, "{}", row_line(w, &r.label, &r.report.mean)).unwrap();
    }
    out
}

pub fn detect_table(report: &DetectReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# test segments={} target size={} worst_fraction={} length_normalize={}",
        report.n_test,
        report.target.len(),
        report.worst_fraction,
        report.length_normalize
    )
    .unwrap();
    if let Some(q) = report.reports.iter().find_map(|r| r.q_err) {
        writeln!(out, "# q_err={q:.6}").unwrap();
    }
    write!(out, "N").unwrap();
    for r in &report.reports {
        write!(out, "\trecall_{0}\tprecision_{0}", r.strategy).unwrap();
    }
    out.push('\n');
    let ns: Vec<usize> = report
        .reports
        .first()
        .map(|r| r.recall_at.keys().copied().collect())
        .unwrap_or_default();
    for n in ns {
        write!(out, "{n}").unwrap();
        for r in &report.reports {
            write!(out, "\t{:.4}\t{:.4}", r.recall_at[&n], r.precision_at[&n]).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_values_render_as_dash() {
        let row = MetricRow {
            pps: 0.5,
            ups: None,
            nll: Some(1.25),
            ece: 0.01,
            sharpness: Some(0.7),
            n_segments: 10,
        };
        let line = row_line(4, "x", &row);
        assert!(line.contains("0.5000"));
        assert!(line.contains(" - ") || line.contains("        -"));
        assert!(line.contains("1.2500"));
    }
}
