//! FIT CSV, five-number summaries and the box-plot SVG.

use std::fmt::Write as _;
use std::io::{Read, Write};

use quantid_core::metrics::FiveNumberSummary;

use crate::bench::{FitReport, FitRow};
use crate::dataset_io::fmt_f64;

pub const CSV_HEADER: [&str; 7] = [
    "run_index",
    "estimator",
    "fit",
    "iterations",
    "converged",
    "sigma2_true",
    "discards",
];

/// One row per `(run, estimator)`. A failed estimator has an empty `fit`.
pub fn write_csv<W: Write>(w: W, report: &FitReport) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &report.rows {
        out.serialize(row)?;
    }
    // An empty report still gets its header.
    if report.rows.is_empty() {
        out.write_record(CSV_HEADER)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> csv::Result<FitReport> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr
        .deserialize::<FitRow>()
        .collect::<csv::Result<Vec<_>>>()?;
    Ok(FitReport {
        rows,
        ..FitReport::default()
    })
}

/// Plain-text table, one line per estimator.
pub fn summary_text(report: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<9} {:>5} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "estimator", "runs", "failed", "min", "q1", "median", "q3", "max"
    );
    for (name, summary) in report.summaries() {
        let total = report.rows.iter().filter(|r| r.estimator == name).count();
        let ok = report.fits(&name).len();
        let _ = write!(s, "{:<9} {:>5} {:>6}", name, ok, total - ok);
        match summary {
            Some(sum) => {
                for v in sum.to_array() {
                    let _ = write!(s, " {v:>9.4}");
                }
            }
            None => {
                for _ in 0..5 {
                    let _ = write!(s, " {:>9}", "-");
                }
            }
        }
        s.push('\n');
    }
    let _ = writeln!(s, "runs = {}", report.n_runs());
    let _ = writeln!(s, "discarded systems = {}", report.total_discards());
    s
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Box plot of the FIT values, whiskers at min and max.
pub fn boxplot_svg(report: &FitReport, title: &str) -> String {
    let boxes: Vec<(String, FiveNumberSummary)> = report
        .summaries()
        .into_iter()
        .filter_map(|(n, s)| s.map(|s| (n, s)))
        .collect();

    let (mut lo, mut hi) = boxes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, s)| {
            (a.min(s.min), b.max(s.max))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    hi = hi.max(1.0);
    lo = lo.min(0.0);
    let pad = 0.05 * (hi - lo).max(1e-6);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_h = H - TOP - BOTTOM;
    let y_of = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    // Axis and ticks every 0.2 (or 0.5 if the range is wide).
    let step = if hi - lo > 3.0 { 0.5 } else { 0.2 };
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-12 {
        let y = y_of(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{:.1}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            t
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#,
        H - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">FIT</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let slot = (W - LEFT - RIGHT) / boxes.len().max(1) as f64;
    let half = (slot * 0.3).min(40.0);
    for (i, (name, b)) in boxes.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let (y0, y1, y2, y3, y4) = (
            y_of(b.min),
            y_of(b.q1),
            y_of(b.median),
            y_of(b.q3),
            y_of(b.max),
        );
        let _ = writeln!(s, r#"<g stroke="black" fill="none">"#);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{y4:.2}" x2="{cx:.2}" y2="{y3:.2}" stroke-dasharray="4 3"/>"#
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{y1:.2}" x2="{cx:.2}" y2="{y0:.2}" stroke-dasharray="4 3"/>"#
        );
        for y in [y0, y4] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{y3:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3"/>"##,
            cx - half,
            2.0 * half,
            (y1 - y3).max(0.5)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y2:.2}" x2="{:.2}" y2="{y2:.2}" stroke="#c0392b" stroke-width="2"/>"##,
            cx - half,
            cx + half
        );
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10" fill="#555">{}</text>"##,
            H - BOTTOM + 32.0,
            fmt_f64((b.median * 1e3).round() / 1e3)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, est: &str, fit: Option<f64>) -> FitRow {
        FitRow {
            run_index: run,
            estimator: est.into(),
            fit,
            iterations: 3,
            converged: true,
            sigma2_true: 0.5,
            discards: run,
        }
    }

    #[test]
    fn csv_round_trip_keeps_failures() {
        let report = FitReport {
            rows: vec![
                row(0, "KB-St", Some(0.25)),
                row(0, "ML-GS", None),
                row(1, "KB-St", Some(-0.1)),
            ],
            ..FitReport::default()
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert!(text.contains("0,ML-GS,,3,true,0.5,0"));
        assert_eq!(read_csv(&buf[..]).unwrap().rows, report.rows);
    }

    #[test]
    fn summary_counts_discards_once_per_run() {
        let report = FitReport {
            rows: vec![
                row(2, "A", Some(0.1)),
                row(2, "B", Some(0.2)),
                row(3, "A", None),
                row(3, "B", Some(0.3)),
            ],
            ..FitReport::default()
        };
        assert_eq!(report.total_discards(), 5);
        let text = summary_text(&report);
        assert!(text.contains("discarded systems = 5"), "{text}");
        let svg = boxplot_svg(&report, "t");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
