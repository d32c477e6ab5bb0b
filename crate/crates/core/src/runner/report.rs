//! Tables and plots derived from a [`ResultBundle`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{ModelGroup, ModelKind};
use super::experiment::{ResultBundle, RunRecord};
use crate::backtest::{aggregate_runs, welch_t_test, BacktestReport, MetricSummary};

/// Column set shared by every table: `(header, metric name)`.
pub const COLUMNS: [(&str, &str); 5] = [
    ("Return", "total_return"),
    ("Sharpe", "sharpe"),
    ("Volatility", "volatility"),
    ("Max DD", "max_drawdown"),
    ("Calmar", "calmar"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Csv,
    Json,
    Svg,
}

/// Value as displayed: percentages for return-like columns, drawdown negative-signed.
fn display_scale(metric: &str) -> f64 {
    match metric {
        "total_return" | "volatility" => 100.0,
        "max_drawdown" => -100.0,
        _ => 1.0,
    }
}

fn summarize(reports: &[&BacktestReport], metric: &str) -> Option<MetricSummary> {
    let xs: Vec<f64> = reports.iter().filter_map(|r| r.metric(metric)).collect();
    match xs.len() {
        0 => None,
        1 => Some(MetricSummary { mean: xs[0], std: None, n: 1 }),
        _ => {
            let owned: Vec<BacktestReport> = reports.iter().map(|r| (*r).clone()).collect();
            aggregate_runs(&owned).ok()?.get(metric).copied()
        }
    }
}

/// Per-model summary over all assets and runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub model_id: String,
    pub model: String,
    pub group: String,
    pub runs: usize,
    /// Keyed by metric name, raw (fractional) values.
    pub metrics: BTreeMap<String, Option<MetricSummary>>,
}

impl ModelRow {
    fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).copied().flatten().map(|s| s.mean)
    }
}

fn by_model(runs: &[RunRecord]) -> BTreeMap<&str, Vec<&RunRecord>> {
    let mut m: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        m.entry(r.model_id.as_str()).or_default().push(r);
    }
    m
}

fn model_row(id: &str, runs: &[&RunRecord]) -> ModelRow {
    let kind = runs[0].kind;
    let reports: Vec<&BacktestReport> = runs.iter().map(|r| &r.report).collect();
    ModelRow {
        model_id: id.to_string(),
        model: kind.display_name().to_string(),
        group: kind.group().label().to_string(),
        runs: runs.len(),
        metrics: COLUMNS.iter().map(|&(_, m)| (m.to_string(), summarize(&reports, m))).collect(),
    }
}

/// Model rows sorted by mean Sharpe, best first; undefined Sharpe sorts last.
pub fn ranking(bundle: &ResultBundle) -> Vec<ModelRow> {
    let mut rows: Vec<ModelRow> = by_model(&bundle.runs).iter().map(|(id, rs)| model_row(id, rs)).collect();
    rows.sort_by(|a, b| {
        let key = |r: &ModelRow| r.mean("sharpe").unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then_with(|| a.model_id.cmp(&b.model_id))
    });
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub models: Vec<String>,
    /// Mean over member models of each model's mean metric.
    pub metrics: BTreeMap<String, Option<f64>>,
}

pub fn groups(bundle: &ResultBundle) -> Vec<GroupRow> {
    let rows = ranking(bundle);
    let kinds: BTreeMap<&str, ModelKind> = bundle.runs.iter().map(|r| (r.model_id.as_str(), r.kind)).collect();
    ModelGroup::ALL
        .iter()
        .filter_map(|&g| {
            let members: Vec<&ModelRow> = rows.iter().filter(|r| kinds[r.model_id.as_str()].group() == g).collect();
            if members.is_empty() {
                return None;
            }
            let metrics = COLUMNS
                .iter()
                .map(|&(_, m)| {
                    let xs: Vec<f64> = members.iter().filter_map(|r| r.mean(m)).collect();
                    let v = (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
                    (m.to_string(), v)
                })
                .collect();
            Some(GroupRow {
                group: g.label().to_string(),
                models: members.iter().map(|r| r.model_id.clone()).collect(),
                metrics,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub model_a: String,
    pub model_b: String,
    /// Two-sided Welch p-value per metric; absent when the test is undefined.
    pub p_values: BTreeMap<String, Option<f64>>,
}

/// Welch tests between every pair of models, on per-run values of each column.
pub fn significance(bundle: &ResultBundle) -> Vec<SignificanceRow> {
    let groups = by_model(&bundle.runs);
    let ids: Vec<&str> = groups.keys().copied().collect();
    let mut out = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let p_values = COLUMNS
                .iter()
                .map(|&(_, m)| {
                    let xs: Vec<f64> = groups[a].iter().filter_map(|r| r.report.metric(m)).collect();
                    let ys: Vec<f64> = groups[b].iter().filter_map(|r| r.report.metric(m)).collect();
                    (m.to_string(), welch_t_test(&xs, &ys).ok().map(|w| w.p))
                })
                .collect();
            out.push(SignificanceRow { model_a: a.to_string(), model_b: b.to_string(), p_values });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetRow {
    /// Asset symbol, or `MEAN` for the average over assets.
    pub asset: String,
    pub model_id: String,
    pub metrics: BTreeMap<String, Option<f64>>,
}

pub fn per_asset(bundle: &ResultBundle) -> Vec<AssetRow> {
    let mut cells: BTreeMap<(&str, &str), Vec<&BacktestReport>> = BTreeMap::new();
    for r in &bundle.runs {
        cells.entry((r.model_id.as_str(), r.asset.as_str())).or_default().push(&r.report);
    }
    let mut rows = Vec::new();
    for ((model, asset), reports) in &cells {
        let metrics = COLUMNS.iter().map(|&(_, m)| (m.to_string(), summarize(reports, m).map(|s| s.mean))).collect();
        rows.push(AssetRow { asset: asset.to_string(), model_id: model.to_string(), metrics });
    }
    for (model, _) in by_model(&bundle.runs) {
        let mine: Vec<&AssetRow> = rows.iter().filter(|r| r.model_id == model).collect();
        let metrics = COLUMNS
            .iter()
            .map(|&(_, m)| {
                let xs: Vec<f64> = mine.iter().filter_map(|r| r.metrics[m]).collect();
                (m.to_string(), (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64))
            })
            .collect();
        rows.push(AssetRow { asset: "MEAN".into(), model_id: model.to_string(), metrics });
    }
    rows
}

fn fmt_value(metric: &str, v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => {
            let s = x * display_scale(metric);
            if display_scale(metric) == 1.0 { format!("{s:.3}") } else { format!("{s:.2}%") }
        }
        _ => "n/a".into(),
    }
}

fn fmt_summary(metric: &str, s: Option<MetricSummary>) -> String {
    match s {
        None => "n/a".into(),
        Some(s) => {
            let k = display_scale(metric).abs();
            let unit = if k == 1.0 { "" } else { "%" };
            let prec = if k == 1.0 { 3 } else { 2 };
            let std = s.std.map_or("n/a".to_string(), |d| format!("{:.prec$}{unit}", d * k));
            format!("{:.prec$}{unit} ± {std}", s.mean * display_scale(metric))
        }
    }
}

fn fmt_p(p: Option<f64>) -> String {
    p.map_or("n/a".into(), |p| format!("{p:.4}"))
}

fn csv_value(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// Fixed-width text table; column widths fit the widest cell.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("table serializes") + "\n"
}

fn headers(first: &[&'static str]) -> Vec<&'static str> {
    first.iter().copied().chain(COLUMNS.iter().map(|c| c.0)).collect()
}

pub const RANKING_HEADER: [&str; 8] = ["Rank", "Model", "Type", "Return", "Sharpe", "Volatility", "Max DD", "Calmar"];

fn ranking_tables(bundle: &ResultBundle) -> (String, String, String) {
    let rows = ranking(bundle);
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = vec![(i + 1).to_string(), r.model.clone(), r.group.clone()];
            v.extend(COLUMNS.iter().map(|&(_, m)| fmt_value(m, r.mean(m))));
            v
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = vec![(i + 1).to_string(), r.model_id.clone(), r.group.clone()];
            v.extend(COLUMNS.iter().map(|&(_, m)| csv_value(r.mean(m))));
            v
        })
        .collect();
    (text_table(&RANKING_HEADER, &text_rows), csv_table(&RANKING_HEADER, &csv_rows), json(&rows))
}

fn uncertainty_tables(bundle: &ResultBundle) -> (String, String, String) {
    let rows = ranking(bundle);
    let h = headers(&["Model", "Runs"]);
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.model.clone(), r.runs.to_string()];
            v.extend(COLUMNS.iter().map(|&(_, m)| fmt_summary(m, r.metrics[m])));
            v
        })
        .collect();
    let mut ch: Vec<String> = vec!["Model".into(), "Runs".into()];
    for (name, _) in COLUMNS {
        ch.push(format!("{name} mean"));
        ch.push(format!("{name} std"));
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.model_id.clone(), r.runs.to_string()];
            for (_, m) in COLUMNS {
                let s = r.metrics[m];
                v.push(csv_value(s.map(|s| s.mean)));
                v.push(csv_value(s.and_then(|s| s.std)));
            }
            v
        })
        .collect();
    let chr: Vec<&str> = ch.iter().map(String::as_str).collect();
    (text_table(&h, &text_rows), csv_table(&chr, &csv_rows), json(&rows))
}

fn group_tables(bundle: &ResultBundle) -> (String, String, String) {
    let rows = groups(bundle);
    let h = headers(&["Type", "Models"]);
    let build = |raw: bool| -> Vec<Vec<String>> {
        rows.iter()
            .map(|g| {
                let mut v = vec![g.group.clone(), g.models.len().to_string()];
                v.extend(COLUMNS.iter().map(|&(_, m)| {
                    if raw { csv_value(g.metrics[m]) } else { fmt_value(m, g.metrics[m]) }
                }));
                v
            })
            .collect()
    };
    (text_table(&h, &build(false)), csv_table(&h, &build(true)), json(&rows))
}

fn significance_tables(bundle: &ResultBundle) -> (String, String, String) {
    let rows = significance(bundle);
    let h = headers(&["Model A", "Model B"]);
    let build = |raw: bool| -> Vec<Vec<String>> {
        rows.iter()
            .map(|s| {
                let mut v = vec![s.model_a.clone(), s.model_b.clone()];
                v.extend(COLUMNS.iter().map(|&(_, m)| {
                    if raw { csv_value(s.p_values[m]) } else { fmt_p(s.p_values[m]) }
                }));
                v
            })
            .collect()
    };
    (text_table(&h, &build(false)), csv_table(&h, &build(true)), json(&rows))
}

fn asset_tables(bundle: &ResultBundle) -> (String, String, String) {
    let rows = per_asset(bundle);
    let h = headers(&["Asset", "Model"]);
    let build = |raw: bool| -> Vec<Vec<String>> {
        rows.iter()
            .map(|a| {
                let mut v = vec![a.asset.clone(), a.model_id.clone()];
                v.extend(COLUMNS.iter().map(|&(_, m)| {
                    if raw { csv_value(a.metrics[m]) } else { fmt_value(m, a.metrics[m]) }
                }));
                v
            })
            .collect()
    };
    (text_table(&h, &build(false)), csv_table(&h, &build(true)), json(&rows))
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

/// Line plot with one polyline per series and a legend entry for each.
pub fn svg_plot(title: &str, series: &[(String, Vec<f64>)]) -> String {
    let (w, h, left, right, top, bottom) = (800.0, 450.0, 60.0, 200.0, 40.0, 40.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let all = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, left + pw / 2.0, xml_escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{hi:.4}</text>"#, left - 4.0, top + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{lo:.4}</text>"#, left - 4.0, top + ph);
    let _ = writeln!(s, r#"<g class="series">"#);
    for (i, (_, v)) in series.iter().enumerate() {
        let n = v.len().max(2) - 1;
        let pts: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite())
            .map(|(k, y)| format!("{:.2},{:.2}", left + pw * k as f64 / n as f64, top + ph * (hi - y) / (hi - lo)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, PALETTE[i % PALETTE.len()], pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, (name, _)) in series.iter().enumerate() {
        let y = top + 14.0 + 18.0 * i as f64;
        let x = w - right + 12.0;
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="3"/>"#, y - 4.0, x + 20.0, y - 4.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="12">{}</text>"#, x + 26.0, xml_escape(name));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Mean equity curve across runs of each model on `asset`, normalised to start at 1.
fn mean_curves(bundle: &ResultBundle, asset: &str) -> Vec<(String, Vec<f64>)> {
    by_model(&bundle.runs)
        .into_iter()
        .filter_map(|(id, runs)| {
            let runs: Vec<&&RunRecord> = runs.iter().filter(|r| r.asset == asset).collect();
            let first = runs.first()?;
            let n = first.curve.values.len();
            let mut acc = vec![0.0; n];
            for r in &runs {
                let v0 = r.curve.values[0];
                for (a, v) in acc.iter_mut().zip(&r.curve.values) {
                    *a += v / v0;
                }
            }
            let label = format!("{} ({})", first.kind.display_name(), id);
            Some((label, acc.iter().map(|a| a / runs.len() as f64).collect()))
        })
        .collect()
}

fn drawdown_path(v: &[f64]) -> Vec<f64> {
    let mut peak = f64::NEG_INFINITY;
    v.iter()
        .map(|&x| {
            peak = peak.max(x);
            x / peak - 1.0
        })
        .collect()
}

fn assets(bundle: &ResultBundle) -> Vec<String> {
    let mut a: Vec<String> = bundle.runs.iter().map(|r| r.asset.clone()).collect();
    a.sort();
    a.dedup();
    a
}

/// One format's files as `(relative path, contents)`.
pub fn render(bundle: &ResultBundle, format: Format) -> Vec<(String, String)> {
    let tables = [
        ("ranking", ranking_tables(bundle)),
        ("uncertainty", uncertainty_tables(bundle)),
        ("groups", group_tables(bundle)),
        ("significance", significance_tables(bundle)),
        ("per_asset", asset_tables(bundle)),
    ];
    let mut out = Vec::new();
    match format {
        Format::Text => {
            for (name, (t, _, _)) in tables {
                out.push((format!("tables/{name}.txt"), t));
            }
        }
        Format::Csv => {
            for (name, (_, c, _)) in tables {
                out.push((format!("tables/{name}.csv"), c));
            }
            for r in &bundle.runs {
                let mut s = String::from("timestamp,equity,rebalanced\n");
                for ((t, v), b) in r.curve.timestamps.iter().zip(&r.curve.values).zip(&r.curve.rebalanced) {
                    let _ = writeln!(s, "{t},{v:e},{}", *b as u8);
                }
                out.push((format!("equity/{}.csv", r.run_id()), s));
            }
        }
        Format::Json => {
            for (name, (_, _, j)) in tables {
                out.push((format!("tables/{name}.json"), j));
            }
        }
        Format::Svg => {
            for a in assets(bundle) {
                let curves = mean_curves(bundle, &a);
                let dd: Vec<(String, Vec<f64>)> = curves.iter().map(|(n, v)| (n.clone(), drawdown_path(v))).collect();
                out.push((format!("plots/equity_{a}.svg"), svg_plot(&format!("Mean equity, {a}"), &curves)));
                out.push((format!("plots/drawdown_{a}.svg"), svg_plot(&format!("Mean drawdown, {a}"), &dd)));
            }
        }
    }
    out
}

pub fn render_all(bundle: &ResultBundle) -> Vec<(String, String)> {
    [Format::Text, Format::Csv, Format::Json, Format::Svg].into_iter().flat_map(|f| render(bundle, f)).collect()
}
