//! CSV, SVG and JSON output for a [`Report`].
//!
//! Numbers are written with six decimals; undefined correlations are `NA`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Report, RunnerError};
use crate::metrics::ErrorBins;

/// CSV files written by [`emit_report`], in write order.
pub const EMITTED_CSV: [&str; 6] = [
    "grid.csv",
    "summary.csv",
    "metrics.csv",
    "bins.csv",
    "hist.csv",
    "domains.csv",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "NA".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

/// Ratio as used in file names: shortest decimal form, e.g. `0.3`.
pub fn format_ratio(ratio: f64) -> String {
    format!("{ratio}")
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| RunnerError::Config(format!("CSV encoding: {e}"));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| RunnerError::Config(format!("CSV encoding: {e}")))?;
    fs::write(path, bytes).map_err(|e| RunnerError::io(path, e))
}

fn grid_rows(report: &Report) -> Vec<Vec<String>> {
    report
        .cells
        .iter()
        .map(|c| {
            vec![
                num(c.ratio),
                c.layer.to_string(),
                c.seed.to_string(),
                opt(c.test_rho),
                opt(c.test_pvalue),
                c.selected_epoch.to_string(),
                c.n_train.to_string(),
                c.n_test.to_string(),
            ]
        })
        .collect()
}

fn summary_rows(report: &Report) -> Vec<Vec<String>> {
    report
        .summary
        .iter()
        .map(|s| {
            let best = report.best_layer(s.ratio) == Some(s.layer);
            vec![
                num(s.ratio),
                s.layer.to_string(),
                opt(s.mean_rho),
                s.seeds.to_string(),
                s.defined_seeds.to_string(),
                u8::from(best).to_string(),
            ]
        })
        .collect()
}

fn metrics_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for b in &report.bundles {
        let mut push = |name: &str, v: Option<f64>| {
            rows.push(vec![num(b.ratio), b.layer.to_string(), name.to_string(), opt(v)]);
        };
        push("ensemble_rho", b.ensemble.map(|c| c.rho));
        push("ensemble_pvalue", b.ensemble.map(|c| c.pvalue));
        push("closest_human_rho", b.closest_human.map(|c| c.rho));
        push("closest_human_pvalue", b.closest_human.map(|c| c.pvalue));
        let hb = b.human_baseline.as_ref();
        push("human_baseline_rho_mean", hb.map(|h| h.mean_rho));
        push("human_baseline_rho_std", hb.map(|h| h.std_rho));
        push("human_baseline_defined_trials", hb.map(|h| h.defined_trials as f64));
        push("abs_error_below_1", Some(b.error_bins.fraction_below(1)));
        push("abs_error_below_2", Some(b.error_bins.fraction_below(2)));
        push("abs_error_below_3", Some(b.error_bins.fraction_below(3)));
    }
    rows
}

fn bins_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for b in &report.bundles {
        for (k, label) in ErrorBins::LABELS.iter().enumerate() {
            rows.push(vec![
                num(b.ratio),
                b.layer.to_string(),
                label.to_string(),
                b.error_bins.counts[k].to_string(),
                num(b.error_bins.fractions[k]),
            ]);
        }
    }
    rows
}

fn hist_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for b in &report.bundles {
        for (source, h) in [("human", &b.human_hist), ("predicted", &b.predicted_hist)] {
            let fr = h.fractions();
            let mut push = |lo: f64, hi: f64, count: usize, f: f64| {
                rows.push(vec![
                    num(b.ratio),
                    b.layer.to_string(),
                    source.to_string(),
                    num(lo),
                    num(hi),
                    count.to_string(),
                    num(f),
                ]);
            };
            push(f64::NEG_INFINITY, h.lo, h.underflow, fr[0]);
            for (k, &c) in h.counts.iter().enumerate() {
                let (lo, hi) = h.bin_edges(k);
                push(lo, hi, c, fr[k + 1]);
            }
            push(h.hi, f64::INFINITY, h.overflow, fr[fr.len() - 1]);
        }
    }
    rows
}

fn domain_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for b in &report.bundles {
        for d in &b.domains {
            rows.push(vec![
                num(b.ratio),
                b.layer.to_string(),
                d.domain.clone(),
                d.count.to_string(),
                num(d.human_mean),
                num(d.human_std),
                num(d.ours_mean),
                num(d.ours_std),
                num(d.human_min),
                num(d.ours_min),
                num(d.human_max),
                num(d.ours_max),
                num(d.diff_pct),
            ]);
        }
    }
    rows
}

/// Mean rho per layer for one ratio, with per-seed points.
pub fn render_layer_svg(report: &Report, ratio: f64) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let mut layers: Vec<_> = report
        .summary
        .iter()
        .filter(|s| s.ratio == ratio)
        .map(|s| s.layer)
        .collect();
    layers.sort();
    let n = layers.len().max(1);
    let x_of = |i: usize| {
        if n == 1 {
            W / 2.0
        } else {
            PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64
        }
    };
    let y_of = |rho: f64| PAD + (H - 2.0 * PAD) * (1.0 - rho) / 2.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">Test Spearman by layer, criterion = {}, train ratio {}</text>"#,
        W / 2.0,
        xml_escape(report.criterion.as_str()),
        format_ratio(ratio)
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let y = y_of(tick);
        let stroke = if tick == 0.0 { "#888" } else { "#ddd" };
        let _ = writeln!(
            s,
            r#"<line x1="{PAD}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{stroke}"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick:.1}</text>"#,
            W - PAD,
            PAD - 6.0,
            y + 4.0
        );
    }
    for (i, l) in layers.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{l}</text>"#,
            x_of(i),
            H - PAD + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">layer</text>"#,
        W / 2.0,
        H - 12.0
    );
    for (i, l) in layers.iter().enumerate() {
        for c in report.cells.iter().filter(|c| c.ratio == ratio && c.layer == *l) {
            if let Some(rho) = c.test_rho {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="#9bb"/>"##,
                    x_of(i),
                    y_of(rho)
                );
            }
        }
    }
    let points: Vec<String> = layers
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            report
                .summary_for(ratio, *l)
                .and_then(|s| s.mean_rho)
                .map(|rho| format!("{:.1},{:.1}", x_of(i), y_of(rho)))
        })
        .collect();
    if !points.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#246" stroke-width="2"/>"##,
            points.join(" ")
        );
    }
    if let Some(best) = report.best_layer(ratio) {
        if let (Some(i), Some(rho)) = (
            layers.iter().position(|l| *l == best),
            report.summary_for(ratio, best).and_then(|s| s.mean_rho),
        ) {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.1}" cy="{:.1}" r="5" fill="#c33"/>"##,
                x_of(i),
                y_of(rho)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes every CSV, one SVG per ratio and `report.json` into `dir`.
/// Returns the written paths.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let tables: [(&[&str], Vec<Vec<String>>); 6] = [
        (
            &["ratio", "layer", "seed", "rho", "pvalue", "selected_epoch", "n_train", "n_test"],
            grid_rows(report),
        ),
        (
            &["ratio", "layer", "mean_rho", "seeds", "defined_seeds", "best"],
            summary_rows(report),
        ),
        (&["ratio", "layer", "metric", "value"], metrics_rows(report)),
        (&["ratio", "layer", "bin", "count", "fraction"], bins_rows(report)),
        (
            &["ratio", "layer", "source", "bin_lo", "bin_hi", "count", "fraction"],
            hist_rows(report),
        ),
        (
            &[
                "ratio", "layer", "domain", "count", "human_mean", "human_std", "ours_mean",
                "ours_std", "human_min", "ours_min", "human_max", "ours_max", "diff_pct",
            ],
            domain_rows(report),
        ),
    ];
    let mut written = Vec::new();
    for (name, (header, rows)) in EMITTED_CSV.iter().zip(tables) {
        let path = dir.join(name);
        write_csv(&path, header, rows)?;
        written.push(path);
    }
    for (ratio, _) in &report.best_layers {
        let path = dir.join(format!("layers_{}.svg", format_ratio(*ratio)));
        fs::write(&path, render_layer_svg(report, *ratio)).map_err(|e| RunnerError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("report.json");
    fs::write(&path, report.to_json()).map_err(|e| RunnerError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.5), "0.500000");
        assert_eq!(num(-1.0 / 3.0), "-0.333333");
        assert_eq!(opt(None), "NA");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(format_ratio(0.3), "0.3");
    }
}
