//! Price ingestion, pair log-spreads, realized volatility and packaging of a
//! series onto a sampling grid.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::simulate::{Path, SamplingGrid};

/// Prices keyed by strictly increasing UTC timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<NaiveDateTime>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return domain("timestamps and prices differ in length");
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return domain("timestamps must be strictly increasing");
        }
        if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return domain(format!("prices must be positive and finite, got {p}"));
        }
        Ok(Self { timestamps, prices })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    /// Rows with a missing, unparseable or nonpositive price.
    pub dropped: usize,
    /// Rows replaced by a later row with the same timestamp.
    pub duplicates: usize,
    /// Whether the file needed reordering.
    pub reordered: bool,
}

#[derive(Debug, Clone, Copy)]
enum TimeColumns {
    Timestamp(usize),
    /// Vendor layout: integer date `YYYYMMDD` and minute-of-day `HHMM`.
    DateTime { date: usize, time: usize },
}

/// ISO-8601 and close variants; offsets are converted to UTC.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    for fmt in ["%Y-%m-%d", "%Y%m%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Ok(d.and_time(NaiveTime::MIN));
        }
    }
    Err(Error::Parse(format!("unrecognized timestamp '{s}'")))
}

/// Vendor date `20141201` and time `930` (09:30) or `1559`.
pub fn parse_vendor_timestamp(date: &str, time: &str) -> Result<NaiveDateTime> {
    let bad = || Error::Parse(format!("unrecognized vendor timestamp '{date} {time}'"));
    let d = NaiveDate::parse_from_str(date.trim(), "%Y%m%d").map_err(|_| bad())?;
    let hhmm: u32 = time.trim().parse().map_err(|_| bad())?;
    let t = NaiveTime::from_hms_opt(hhmm / 100, hhmm % 100, 0).ok_or_else(bad)?;
    Ok(d.and_time(t))
}

/// Reads a price CSV with a header. `column` picks the price column; by default
/// `close`, then `price`.
pub fn read_prices<R: Read>(reader: R, column: Option<&str>) -> Result<(PriceSeries, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let time_cols = match (find("timestamp"), find("date"), find("time")) {
        (Some(i), _, _) => TimeColumns::Timestamp(i),
        (None, Some(date), Some(time)) => TimeColumns::DateTime { date, time },
        (None, Some(i), None) => TimeColumns::Timestamp(i),
        _ => return Err(Error::Parse("no timestamp column (timestamp, or date and time)".into())),
    };
    let price_col = match column {
        Some(c) => find(&c.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("price column '{c}' not in header")))?,
        None => find("close")
            .or_else(|| find("price"))
            .ok_or_else(|| Error::Parse("no close or price column".into()))?,
    };

    let mut report = LoadReport::default();
    let mut rows: Vec<(NaiveDateTime, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        report.rows += 1;
        let line = i + 2;
        let ts = match time_cols {
            TimeColumns::Timestamp(c) => parse_timestamp(record.get(c).unwrap_or("")),
            TimeColumns::DateTime { date, time } => {
                parse_vendor_timestamp(record.get(date).unwrap_or(""), record.get(time).unwrap_or(""))
            }
        }
        .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        match record.get(price_col).and_then(|p| p.parse::<f64>().ok()) {
            Some(p) if p > 0.0 && p.is_finite() => rows.push((ts, p)),
            _ => report.dropped += 1,
        }
    }
    if report.dropped > 0 {
        log::warn!("dropped {} rows with a missing or nonpositive price", report.dropped);
    }

    report.reordered = rows.windows(2).any(|w| w[1].0 < w[0].0);
    rows.sort_by_key(|r| r.0);
    let mut timestamps: Vec<NaiveDateTime> = Vec::with_capacity(rows.len());
    let mut prices: Vec<f64> = Vec::with_capacity(rows.len());
    for (ts, p) in rows {
        if timestamps.last() == Some(&ts) {
            report.duplicates += 1;
            *prices.last_mut().expect("nonempty") = p;
        } else {
            timestamps.push(ts);
            prices.push(p);
        }
    }
    if report.duplicates > 0 {
        log::warn!("{} duplicate timestamps; the later row was kept", report.duplicates);
    }
    if prices.is_empty() {
        return Err(Error::Parse("no valid price rows".into()));
    }
    Ok((PriceSeries::new(timestamps, prices)?, report))
}

pub fn load_prices(path: &std::path::Path, column: Option<&str>) -> Result<(PriceSeries, LoadReport)> {
    let file = std::fs::File::open(path)?;
    read_prices(std::io::BufReader::new(file), column)
}

/// Writes `timestamp,price` in a form [`read_prices`] reads back unchanged.
pub fn write_prices<W: Write>(series: &PriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "price"])?;
    for (ts, p) in series.timestamps.iter().zip(&series.prices) {
        w.write_record([ts.format("%Y-%m-%dT%H:%M:%S%.f").to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// A real-valued series on timestamps (spread, daily RV).
#[derive(Debug, Clone, PartialEq)]
pub struct TimedSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

/// `Y_t = ln(S_A(t)/S_A(0)) - ln(S_B(t)/S_B(0))` on the common timestamps,
/// with `t = 0` the first shared timestamp.
pub fn pair_spread(a: &PriceSeries, b: &PriceSeries) -> Result<TimedSeries> {
    if a.is_empty() || b.is_empty() {
        return domain("both price series must be nonempty");
    }
    let (mut i, mut j) = (0, 0);
    let mut joined = Vec::new();
    while i < a.len() && j < b.len() {
        match a.timestamps[i].cmp(&b.timestamps[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                joined.push((a.timestamps[i], a.prices[i], b.prices[j]));
                i += 1;
                j += 1;
            }
        }
    }
    let Some(&(_, a0, b0)) = joined.first() else {
        return Err(Error::Degenerate("the two series share no timestamps".into()));
    };
    let (timestamps, values) = joined
        .into_iter()
        .map(|(ts, pa, pb)| (ts, (pa / a0).ln() - (pb / b0).ln()))
        .unzip();
    Ok(TimedSeries { timestamps, values })
}

/// Log returns between consecutive interval marks within one UTC day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayReturns {
    pub date: NaiveDate,
    pub returns: Vec<f64>,
}

/// Parses `5m`, `30s`, `1h` or bare seconds into seconds.
pub fn parse_interval(s: &str) -> Result<u32> {
    let s = s.trim();
    let (digits, unit) = s.split_at(s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len()));
    let n: u32 = digits.parse().map_err(|_| Error::Parse(format!("invalid interval '{s}'")))?;
    let secs = match unit {
        "" | "s" => n,
        "m" | "min" => n * 60,
        "h" => n * 3600,
        _ => return Err(Error::Parse(format!("invalid interval unit in '{s}' (s|m|h)"))),
    };
    if secs == 0 {
        return domain("interval must be positive");
    }
    Ok(secs)
}

/// Samples the last price in each `interval_secs` bucket of the day and takes
/// log differences between consecutive buckets of the same day.
pub fn intraday_returns(series: &PriceSeries, interval_secs: u32) -> Result<Vec<DayReturns>> {
    if interval_secs == 0 {
        return domain("interval must be positive");
    }
    let mut days: Vec<DayReturns> = Vec::new();
    let mut marks: Vec<(NaiveDate, u32, f64)> = Vec::new();
    for (ts, &p) in series.timestamps.iter().zip(&series.prices) {
        let key = (ts.date(), ts.num_seconds_from_midnight() / interval_secs);
        match marks.last_mut() {
            Some(last) if (last.0, last.1) == key => last.2 = p,
            _ => marks.push((key.0, key.1, p)),
        }
    }
    for w in marks.windows(2) {
        if days.last().map(|d| d.date) != Some(w[0].0) {
            days.push(DayReturns { date: w[0].0, returns: Vec::new() });
        }
        if w[1].0 == w[0].0 {
            days.last_mut().expect("pushed above").returns.push((w[1].2 / w[0].2).ln());
        }
    }
    if let Some(last) = marks.last() {
        if days.last().map(|d| d.date) != Some(last.0) {
            days.push(DayReturns { date: last.0, returns: Vec::new() });
        }
    }
    Ok(days)
}

/// `RV = sqrt(Σ r_t²)` for one day.
pub fn realized_volatility_of(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return domain("realized volatility needs at least one return");
    }
    Ok(returns.iter().map(|r| r * r).sum::<f64>().sqrt())
}

/// Daily RV series; days without returns are skipped with a warning.
pub fn realized_volatility(days: &[DayReturns]) -> TimedSeries {
    let mut out = TimedSeries { timestamps: Vec::new(), values: Vec::new() };
    for day in days {
        match realized_volatility_of(&day.returns) {
            Ok(rv) => {
                out.timestamps.push(day.date.and_time(NaiveTime::MIN));
                out.values.push(rv);
            }
            Err(_) => log::warn!("{} has no intraday returns; skipped", day.date),
        }
    }
    out
}

/// Which points of the series were placed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathMapping {
    pub stride: usize,
    pub used: usize,
    pub total: usize,
}

/// Places `N·M + 1` points of `values` on the grid: indices `0, s, 2s, ...`
/// with stride `s = floor(len / (N·M + 1))`.
pub fn to_path(values: &[f64], grid: SamplingGrid) -> Result<(Path, PathMapping)> {
    let need = grid.len();
    if values.len() < need {
        return domain(format!(
            "series has {} points but N={} M={} needs {need}",
            values.len(),
            grid.n_periods(),
            grid.per_period()
        ));
    }
    let stride = values.len() / need;
    let picked: Vec<f64> = values.iter().step_by(stride).take(need).copied().collect();
    let mapping = PathMapping { stride, used: need, total: values.len() };
    Ok((Path::new(grid, picked)?, mapping))
}

/// Reads one numeric column by header name; a single-column file needs no match.
pub fn read_column<R: Read>(reader: R, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = match headers.iter().position(|h| h.eq_ignore_ascii_case(column)) {
        Some(i) => i,
        None if headers.len() == 1 => 0,
        None => return Err(Error::Parse(format!("column '{column}' not in header"))),
    };
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = record.get(idx).unwrap_or("");
        if cell.is_empty() && record.iter().all(str::is_empty) {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: '{cell}' is not a number", i + 2)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("column '{column}' has no values")));
    }
    Ok(out)
}

pub fn read_column_file(path: &std::path::Path, column: &str) -> Result<Vec<f64>> {
    read_column(std::io::BufReader::new(std::fs::File::open(path)?), column)
}

/// Path as `t,y`.
pub fn write_path<W: Write>(path: &Path, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "y"])?;
    for (t, y) in path.times().zip(path.values()) {
        w.write_record([t.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Increments as `n,dl`, numbered from 1.
pub fn write_increments<W: Write>(values: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "dl"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample ACF as `lag,acf`.
pub fn write_acf<W: Write>(acf: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lag", "acf"])?;
    for (k, v) in acf.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Timed series as `t,y,timestamp`, `t` the observation index.
pub fn write_timed_series<W: Write>(series: &TimedSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "y", "timestamp"])?;
    for (i, (ts, y)) in series.timestamps.iter().zip(&series.values).enumerate() {
        w.write_record([i.to_string(), y.to_string(), ts.format("%Y-%m-%dT%H:%M:%S%.f").to_string()])?;
    }
    w.flush()?;
    Ok(())
}
