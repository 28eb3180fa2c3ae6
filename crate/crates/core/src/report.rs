//! CSV, JSON and Markdown renderings of an [`EvalReport`].

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, ReportCell};

pub const REPORT_CSV_HEADER: [&str; 8] = [
    "model",
    "horizon",
    "provider",
    "relative_mse",
    "mse",
    "normalizer",
    "windows",
    "error",
];

/// Shortest representation that parses back to the same `f64`.
fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Archive(format!("csv: {other:?}")),
    }
}

pub fn report_csv(r: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER).map_err(csv_err)?;
    for c in &r.cells {
        w.write_record([
            c.model.clone(),
            c.horizon.to_string(),
            c.provider.clone(),
            num(c.relative_mse),
            num(c.mse),
            num(c.normalizer),
            c.windows.to_string(),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Archive(e.to_string()))
}

pub fn trace_csv(r: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "horizon", "provider", "window", "mse"])
        .map_err(csv_err)?;
    for t in &r.traces {
        w.write_record([
            t.model.clone(),
            t.horizon.to_string(),
            t.provider.clone(),
            t.window.to_string(),
            t.mse.to_string(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

/// Parses the cell rows written by [`report_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportCell>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(REPORT_CSV_HEADER) {
        return Err(Error::Archive("unexpected report header".into()));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Archive(format!("bad number {s:?}")))
        }
    };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Archive(format!("bad integer {s:?}"))) };
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ReportCell {
                model: rec[0].to_string(),
                horizon: int(&rec[1])?,
                provider: rec[2].to_string(),
                relative_mse: opt(&rec[3])?,
                mse: opt(&rec[4])?,
                normalizer: opt(&rec[5])?,
                windows: int(&rec[6])?,
                error: (!rec[7].is_empty()).then(|| rec[7].to_string()),
            })
        })
        .collect()
}

pub fn horizon_label(n: usize) -> String {
    match n {
        1 => "Week".into(),
        4 => "Month".into(),
        13 => "Quarter".into(),
        26 => "Semester".into(),
        _ => format!("{n} steps"),
    }
}

/// Models as row groups, horizons as rows, providers as columns; the lowest
/// relative MSE across models in each (horizon, provider) is bold.
pub fn report_markdown(r: &EvalReport) -> String {
    let models = r.models();
    let mut providers: Vec<&str> = Vec::new();
    let mut horizons: Vec<usize> = Vec::new();
    for c in &r.cells {
        if !providers.contains(&c.provider.as_str()) {
            providers.push(&c.provider);
        }
        if !horizons.contains(&c.horizon) {
            horizons.push(c.horizon);
        }
    }
    horizons.sort_unstable();

    let mut out = String::from("# Out-of-sample relative MSE\n\n");
    out.push_str("| Model | Horizon |");
    for p in &providers {
        out.push_str(&format!(" {p} |"));
    }
    out.push_str("\n|:--|:--|");
    out.push_str(&"--:|".repeat(providers.len()));
    out.push('\n');
    for m in &models {
        for (k, &h) in horizons.iter().enumerate() {
            let label = if k == 0 { m.as_str() } else { "" };
            out.push_str(&format!("| {label} | {} |", horizon_label(h)));
            for p in &providers {
                let cell = r.cell(m, h, p);
                let best = models
                    .iter()
                    .filter_map(|o| r.cell(o, h, p).and_then(|c| c.relative_mse))
                    .fold(f64::INFINITY, f64::min);
                let text = match cell.and_then(|c| c.relative_mse) {
                    Some(v) if v == best && models.len() > 1 => format!("**{v:.4}**"),
                    Some(v) => format!("{v:.4}"),
                    None if cell.is_some() => "failed".into(),
                    None => String::new(),
                };
                out.push_str(&format!(" {text} |"));
            }
            out.push('\n');
        }
    }
    let md = &r.metadata;
    out.push_str(&format!(
        "\nRanks {}; T_train = {}, T_test = {}; normalizer {:?}; span {}; config {}.\n",
        md.ranks, md.train_length, md.test_length, md.normalizer, md.span, md.config_hash
    ));
    out
}

pub fn report_json(r: &EvalReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(r)?)
}

pub fn parse_report_json(text: &str) -> Result<EvalReport> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `report.csv`, `report.json`, `report.md` and `trace.csv` into `dir`.
pub fn emit_report(r: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("report.csv", report_csv(r)?),
        ("report.json", report_json(r)?),
        ("report.md", report_markdown(r)),
        ("trace.csv", trace_csv(r)?),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}
