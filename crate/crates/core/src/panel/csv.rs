//! Hourly load CSVs in the `Datetime,<PROVIDER>_MW` layout.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime, Timelike};

use super::PanelSeries;
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Longest interior run of missing hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 6;

/// Fraction of missing hours above which a provider is rejected.
pub const MAX_MISSING_FRACTION: f64 = 0.05;

/// Readings of one provider as they appear in its file(s), unsorted.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub provider: String,
    pub readings: Vec<(NaiveDateTime, f64)>,
}

/// Inclusive range of hourly instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

/// What alignment had to repair, per provider (in panel order).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub duplicates_averaged: Vec<usize>,
    pub interpolated: Vec<usize>,
    pub trimmed_hours: usize,
}

impl IngestReport {
    pub fn repaired_cells(&self) -> usize {
        self.duplicates_averaged.iter().sum::<usize>() + self.interpolated.iter().sum::<usize>()
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
}

/// Parses one provider file. `path` is only used for labels in errors.
///
/// Empty value fields are treated as missing hours.
pub fn parse_provider_csv<R: Read>(path: &Path, reader: R) -> Result<RawSeries> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, format!("unreadable header: {e}")))?
        .clone();
    if headers.len() != 2 {
        return Err(parse_err(
            1,
            format!("expected 2 columns (Datetime, <PROVIDER>_MW), found {}", headers.len()),
        ));
    }
    if !headers[0].eq_ignore_ascii_case("datetime") {
        return Err(parse_err(1, format!("first column must be Datetime, found {:?}", &headers[0])));
    }
    let label = headers[1].trim();
    let provider = label.strip_suffix("_MW").unwrap_or(label).to_string();
    if provider.is_empty() {
        return Err(parse_err(1, "empty provider column name".into()));
    }

    let mut readings = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| parse_err(line, format!("bad timestamp {:?}", &rec[0])))?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(parse_err(line, format!("timestamp {ts} is not on the hour")));
        }
        let field = &rec[1];
        if field.is_empty() {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(line, format!("bad value {field:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value {field:?}")));
        }
        readings.push((ts, v));
    }
    Ok(RawSeries { provider, readings })
}

/// Reads, merges and aligns provider files onto one hourly calendar.
///
/// Providers are ordered by label; several files for one label are merged.
pub fn ingest_csv(paths: &[PathBuf], span: Option<Span>) -> Result<(PanelSeries, IngestReport)> {
    let mut raws = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        raws.push(parse_provider_csv(path, file)?);
    }
    align(raws, span)
}

/// Aligns parsed series: duplicates averaged, short interior gaps
/// interpolated, missing edges trimmed, then restricted to the common span.
pub fn align(raws: Vec<RawSeries>, span: Option<Span>) -> Result<(PanelSeries, IngestReport)> {
    let mut merged: BTreeMap<String, Vec<(NaiveDateTime, f64)>> = BTreeMap::new();
    for raw in raws {
        merged.entry(raw.provider).or_default().extend(raw.readings);
    }
    if merged.is_empty() {
        return Err(Error::EmptySpan);
    }

    // sort and average duplicates
    let mut series = Vec::with_capacity(merged.len());
    let mut duplicates = Vec::with_capacity(merged.len());
    for (provider, mut readings) in merged {
        readings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut dedup: Vec<(NaiveDateTime, f64)> = Vec::with_capacity(readings.len());
        let mut counts: Vec<usize> = Vec::with_capacity(readings.len());
        let mut extra = 0;
        for (ts, v) in readings {
            match dedup.last_mut() {
                Some(last) if last.0 == ts => {
                    last.1 += v;
                    *counts.last_mut().unwrap() += 1;
                    extra += 1;
                }
                _ => {
                    dedup.push((ts, v));
                    counts.push(1);
                }
            }
        }
        for (r, c) in dedup.iter_mut().zip(&counts) {
            r.1 /= *c as f64;
        }
        if dedup.is_empty() {
            return Err(Error::EmptySpan);
        }
        duplicates.push(extra);
        series.push((provider, dedup));
    }

    let span = match span {
        Some(s) => s,
        None => Span {
            start: series.iter().map(|s| s.1[0].0).max().unwrap(),
            end: series.iter().map(|s| s.1.last().unwrap().0).min().unwrap(),
        },
    };
    if span.start > span.end {
        return Err(Error::EmptySpan);
    }
    let hours = (span.end - span.start).num_hours() as usize + 1;

    let mut grids: Vec<Vec<Option<f64>>> = Vec::with_capacity(series.len());
    for (provider, readings) in &series {
        let mut grid = vec![None; hours];
        for &(ts, v) in readings {
            if ts < span.start || ts > span.end {
                continue;
            }
            grid[(ts - span.start).num_hours() as usize] = Some(v);
        }
        let missing = grid.iter().filter(|v| v.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * hours as f64 {
            return Err(Error::TooMuchMissing {
                provider: provider.clone(),
                missing,
                total: hours,
            });
        }
        grids.push(grid);
    }

    let lead = grids
        .iter()
        .map(|g| g.iter().take_while(|v| v.is_none()).count())
        .max()
        .unwrap_or(0);
    let trail = grids
        .iter()
        .map(|g| g.iter().rev().take_while(|v| v.is_none()).count())
        .max()
        .unwrap_or(0);
    if lead + trail >= hours {
        return Err(Error::EmptySpan);
    }
    let keep = lead..hours - trail;
    let start = span.start + Duration::hours(lead as i64);

    let mut values = Vec::with_capacity(grids.len());
    let mut interpolated = Vec::with_capacity(grids.len());
    for ((provider, _), grid) in series.iter().zip(&grids) {
        let grid = &grid[keep.clone()];
        let (filled, count) = fill_gaps(grid, |gap_start, len| Error::GapTooLong {
            provider: provider.clone(),
            start: (start + Duration::hours(gap_start as i64)).to_string(),
            hours: len,
        })?;
        values.push(filled);
        interpolated.push(count);
    }

    let timestamps = (0..keep.len())
        .map(|h| start + Duration::hours(h as i64))
        .collect();
    let panel = PanelSeries {
        providers: series.into_iter().map(|(p, _)| p).collect(),
        timestamps,
        values,
    };
    let report = IngestReport {
        duplicates_averaged: duplicates,
        interpolated,
        trimmed_hours: lead + trail,
    };
    Ok((panel, report))
}

/// Linear interpolation across interior runs of `None`; endpoints must be set.
fn fill_gaps(
    grid: &[Option<f64>],
    too_long: impl Fn(usize, usize) -> Error,
) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(grid.len());
    let mut filled = 0;
    let mut i = 0;
    while i < grid.len() {
        match grid[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let run = grid[i..].iter().take_while(|v| v.is_none()).count();
                if run > MAX_INTERPOLATED_GAP {
                    return Err(too_long(i, run));
                }
                let left = out[i - 1];
                let right = grid[i + run].expect("interior gap has a right neighbour");
                for h in 1..=run {
                    let w = h as f64 / (run + 1) as f64;
                    out.push(left + w * (right - left));
                }
                filled += run;
                i += run;
            }
        }
    }
    Ok((out, filled))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn parse(text: &str) -> Result<RawSeries> {
        parse_provider_csv(Path::new("test.csv"), text.as_bytes())
    }

    #[test]
    fn parses_kaggle_layout() {
        let raw = parse("Datetime,AEP_MW\n2012-07-01 00:00:00,100.5\n2012-07-01 01:00:00,99\n").unwrap();
        assert_eq!(raw.provider, "AEP");
        assert_eq!(raw.readings.len(), 2);
        assert_eq!(raw.readings[0], (ts("2012-07-01 00:00:00"), 100.5));
    }

    #[test]
    fn reports_line_of_bad_row() {
        let err = parse("Datetime,AEP_MW\n2012-07-01 00:00:00,1\n2012-07-01 01:00:00,abc\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("Datetime,AEP_MW\nyesterday,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse("Time,AEP_MW\n").is_err());
        assert!(parse("Datetime,A,B\n").is_err());
    }

    #[test]
    fn duplicate_hour_is_averaged() {
        // autumn fall-back: 01:00 appears twice
        let raw = parse(
            "Datetime,DUQ_MW\n2017-11-05 00:00:00,1500\n2017-11-05 01:00:00,1400\n\
             2017-11-05 01:00:00,1420\n2017-11-05 02:00:00,1390\n",
        )
        .unwrap();
        let (panel, report) = align(vec![raw], None).unwrap();
        assert_eq!(panel.values[0], vec![1500.0, 1410.0, 1390.0]);
        assert_eq!(report.duplicates_averaged, vec![1]);
    }

    #[test]
    fn short_gap_interpolated_long_gap_rejected() {
        let mut text = String::from("Datetime,X_MW\n");
        for h in 0..200 {
            if h == 50 || h == 51 {
                continue;
            }
            text.push_str(&format!("{},{}\n", ts("2012-07-02 00:00:00") + Duration::hours(h), h));
        }
        let (panel, report) = align(vec![parse(&text).unwrap()], None).unwrap();
        assert_eq!(report.interpolated, vec![2]);
        assert!((panel.values[0][50] - 50.0).abs() < 1e-12);
        assert!((panel.values[0][51] - 51.0).abs() < 1e-12);

        let mut text = String::from("Datetime,X_MW\n");
        for h in 0..400 {
            if (100..108).contains(&h) {
                continue;
            }
            text.push_str(&format!("{},{}\n", ts("2012-07-02 00:00:00") + Duration::hours(h), h));
        }
        let err = align(vec![parse(&text).unwrap()], None).unwrap_err();
        assert!(matches!(err, Error::GapTooLong { hours: 8, .. }));
    }

    #[test]
    fn too_many_missing_hours() {
        let mut text = String::from("Datetime,X_MW\n");
        for h in 0..100 {
            if h % 10 == 5 {
                continue;
            }
            text.push_str(&format!("{},1\n", ts("2012-07-02 00:00:00") + Duration::hours(h)));
        }
        let err = align(vec![parse(&text).unwrap()], None).unwrap_err();
        assert!(matches!(err, Error::TooMuchMissing { missing: 10, .. }));
    }

    #[test]
    fn intersection_span_and_edge_trim() {
        let start = ts("2012-07-02 00:00:00");
        let a = RawSeries {
            provider: "B".into(),
            readings: (0..48).map(|h| (start + Duration::hours(h), h as f64)).collect(),
        };
        let b = RawSeries {
            provider: "A".into(),
            readings: (10..60).map(|h| (start + Duration::hours(h), 1.0)).collect(),
        };
        let (panel, _) = align(vec![a, b], None).unwrap();
        assert_eq!(panel.providers, vec!["A", "B"]);
        assert_eq!(panel.timestamps[0], start + Duration::hours(10));
        assert_eq!(panel.len(), 38);
        assert_eq!(panel.values[1][0], 10.0);

        // explicit span wider than coverage: edges trimmed
        let c = RawSeries {
            provider: "C".into(),
            readings: (1..100).map(|h| (start + Duration::hours(h), 2.0)).collect(),
        };
        let (panel, report) = align(
            vec![c],
            Some(Span {
                start,
                end: start + Duration::hours(100),
            }),
        )
        .unwrap();
        assert_eq!(report.trimmed_hours, 2);
        assert_eq!(panel.len(), 99);
    }

    #[test]
    fn empty_intersection() {
        let start = ts("2012-07-02 00:00:00");
        let a = RawSeries {
            provider: "A".into(),
            readings: (0..10).map(|h| (start + Duration::hours(h), 1.0)).collect(),
        };
        let b = RawSeries {
            provider: "B".into(),
            readings: (20..30).map(|h| (start + Duration::hours(h), 1.0)).collect(),
        };
        assert!(matches!(align(vec![a, b], None), Err(Error::EmptySpan)));
    }
}
