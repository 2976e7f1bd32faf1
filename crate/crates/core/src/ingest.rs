//! JHU-format cumulative case files to model-ready count windows.
//!
//! The global confirmed-cases file has the header
//! `Province/State,Country/Region,Lat,Long,<M/D/YY>...`, one row per
//! province. Rows of a country are summed, differenced to daily counts,
//! negative differences are set to zero, and a window of `T` days is cut
//! together with the `τ` days before it.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};

use crate::error::{Error, Result};
use crate::model::{CountSeries, Hyperparams};

pub const DEFAULT_LAMBDA_O: f64 = 0.05;
const DATE_COLUMNS_START: usize = 4;

/// Dated integer series, cumulative or daily.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatedSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<i64>,
}

impl DatedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn parse_jhu_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%m/%d/%y").ok()
}

pub fn parse_jhu_csv(path: &Path, country: &str) -> Result<DatedSeries> {
    let file = std::fs::File::open(path)?;
    parse_jhu_reader(file, country)
}

/// Sums the rows whose `Country/Region` equals `country`.
pub fn parse_jhu_reader<R: Read>(reader: R, country: &str) -> Result<DatedSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() <= DATE_COLUMNS_START || header.get(1).map(str::trim) != Some("Country/Region") {
        return Err(Error::Parse {
            line: 1,
            message: "expected header Province/State,Country/Region,Lat,Long,<dates>".into(),
        });
    }
    let dates = header
        .iter()
        .skip(DATE_COLUMNS_START)
        .map(|h| {
            parse_jhu_date(h).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("'{h}' is not an M/D/YY date"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for w in dates.windows(2) {
        if w[0].succ_opt() != Some(w[1]) {
            return Err(Error::Parse {
                line: 1,
                message: format!("date columns are not consecutive: {} then {}", w[0], w[1]),
            });
        }
    }

    let mut totals = vec![0i64; dates.len()];
    let mut matched = 0usize;
    let mut countries: Vec<String> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("{} fields, expected {}", record.len(), header.len()),
            });
        }
        let name = record[1].trim();
        if name != country {
            if !countries.iter().any(|c| c == name) {
                countries.push(name.to_string());
            }
            continue;
        }
        matched += 1;
        for (k, field) in record.iter().skip(DATE_COLUMNS_START).enumerate() {
            let v = parse_count(field).ok_or_else(|| Error::Parse {
                line,
                message: format!("'{field}' is not a count (column {})", header.get(k + DATE_COLUMNS_START).unwrap_or("?")),
            })?;
            totals[k] += v;
        }
    }
    if matched == 0 {
        return Err(Error::Lookup(unknown_country_message(country, &countries)));
    }
    Ok(DatedSeries { dates, values: totals })
}

fn parse_count(field: &str) -> Option<i64> {
    let f = field.trim();
    if f.is_empty() {
        return Some(0);
    }
    f.parse::<i64>().ok().or_else(|| {
        let x: f64 = f.parse().ok()?;
        (x.fract() == 0.0 && x.is_finite()).then_some(x as i64)
    })
}

fn unknown_country_message(country: &str, known: &[String]) -> String {
    let needle = country.to_lowercase();
    let mut scored: Vec<(f64, &String)> = known
        .iter()
        .map(|k| {
            let hay = k.to_lowercase();
            let bonus = if hay.contains(&needle) || needle.contains(&hay) { 1.0 } else { 0.0 };
            (strsim::jaro_winkler(&needle, &hay) + bonus, k)
        })
        .filter(|(s, _)| *s >= 0.8)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let near: Vec<&str> = scored.iter().take(3).map(|(_, k)| k.as_str()).collect();
    if near.is_empty() {
        format!("unknown country '{country}'")
    } else {
        format!("unknown country '{country}'; did you mean: {}?", near.join(", "))
    }
}

/// First differences with negative values replaced by zero. The output
/// starts at the second date.
pub fn to_daily(cumulative: &DatedSeries) -> Result<DatedSeries> {
    if cumulative.len() < 2 {
        return Err(Error::Range("need at least two cumulative values".into()));
    }
    Ok(DatedSeries {
        dates: cumulative.dates[1..].to_vec(),
        values: cumulative.values.windows(2).map(|w| (w[1] - w[0]).max(0)).collect(),
    })
}

/// The `n_days` days from `start`, plus the `tau` days before as history.
pub fn window(daily: &DatedSeries, start: NaiveDate, n_days: usize, tau: usize) -> Result<CountSeries> {
    if n_days == 0 {
        return Err(Error::Config("window must hold at least one day".into()));
    }
    let first = *daily.dates.first().ok_or_else(|| Error::Range("empty daily series".into()))?;
    let last = *daily.dates.last().expect("nonempty");
    let earliest = first + Duration::days(tau as i64);
    let latest = last - Duration::days(n_days as i64 - 1);
    if start < earliest || start > latest {
        return Err(Error::Range(if earliest > latest {
            format!(
                "series {first}..{last} is too short for {tau} days of history and a {n_days}-day window"
            )
        } else {
            format!("start {start} outside the admissible range {earliest}..{latest}")
        }));
    }
    let s = (start - first).num_days() as usize;
    let to_u64 = |v: &[i64]| -> Vec<u64> { v.iter().map(|&x| x.max(0) as u64).collect() };
    CountSeries::new(
        daily.dates[s..s + n_days].to_vec(),
        to_u64(&daily.values[s..s + n_days]),
        to_u64(&daily.values[s - tau..s]),
    )
}

/// Sample standard deviation (divisor `n − 1`).
pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `λ_O = 0.05`, `λ_R = 3.5·√6·σ_Z/4` with `σ_Z` the sample standard
/// deviation of the window counts.
pub fn lambda_defaults(counts: &CountSeries) -> Result<Hyperparams> {
    if counts.len() < 2 {
        return Err(Error::Range("need at least two days to estimate the count spread".into()));
    }
    let z: Vec<f64> = counts.values().iter().map(|&v| v as f64).collect();
    let sigma = sample_sd(&z);
    if sigma == 0.0 {
        return Err(Error::Degenerate("constant counts give lambda_R = 0".into()));
    }
    Hyperparams::new(3.5 * 6f64.sqrt() * sigma / 4.0, DEFAULT_LAMBDA_O)
}

/// Writes `date,count,part` rows, `part` being `history` or `window`.
pub fn write_window_csv<W: Write>(counts: &CountSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "count", "part"])?;
    let start = counts.dates()[0];
    let tau = counts.history().len();
    for (k, v) in counts.history().iter().enumerate() {
        let d = start - Duration::days((tau - k) as i64);
        w.write_record([d.to_string(), v.to_string(), "history".into()])?;
    }
    for (d, v) in counts.dates().iter().zip(counts.values()) {
        w.write_record([d.to_string(), v.to_string(), "window".into()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_window_csv<R: Read>(input: R) -> Result<CountSeries> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut history = Vec::new();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!("{} fields, expected 3", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| bad(format!("date: {e}")))?;
        if let Some(p) = prev {
            if p.succ_opt() != Some(date) {
                return Err(bad(format!("date {date} does not follow {p}")));
            }
        }
        prev = Some(date);
        let count: u64 = record[1].parse().map_err(|e| bad(format!("count: {e}")))?;
        match &record[2] {
            "history" if dates.is_empty() => history.push(count),
            "history" => return Err(bad("history row after window rows".into())),
            "window" => {
                dates.push(date);
                values.push(count);
            }
            other => return Err(bad(format!("unknown part '{other}'"))),
        }
    }
    CountSeries::new(dates, values, history)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
Province/State,Country/Region,Lat,Long,1/1/21,1/2/21,1/3/21,1/4/21
,Atlantis,1.0,2.0,10,15,14,30
North,Utopia,0,0,100,110,130,135
\"South, Lower\",Utopia,0,0,5,5,9,20
,United Kingdom,55,-3,1,2,3,4
";

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn single_row_passes_through() {
        let s = parse_jhu_reader(FIXTURE.as_bytes(), "Atlantis").unwrap();
        assert_eq!(s.values, vec![10, 15, 14, 30]);
        assert_eq!(s.dates[0], d(2021, 1, 1));
        assert_eq!(s.dates[3], d(2021, 1, 4));
    }

    #[test]
    fn provinces_are_summed() {
        let s = parse_jhu_reader(FIXTURE.as_bytes(), "Utopia").unwrap();
        assert_eq!(s.values, vec![105, 115, 139, 155]);
    }

    #[test]
    fn unknown_country_lists_near_matches() {
        match parse_jhu_reader(FIXTURE.as_bytes(), "United Kingdon") {
            Err(Error::Lookup(msg)) => assert!(msg.contains("United Kingdom"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match parse_jhu_reader(FIXTURE.as_bytes(), "Narnia") {
            Err(Error::Lookup(msg)) => assert!(!msg.contains("did you mean")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let bad = FIXTURE.replace("100,110", "100,x");
        match parse_jhu_reader(bad.as_bytes(), "Utopia") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = FIXTURE.replace(",1,2,3,4", ",1,2,3");
        assert!(matches!(parse_jhu_reader(short.as_bytes(), "United Kingdom"), Err(Error::Parse { line: 5, .. })));
        let header = FIXTURE.replace("1/3/21", "Jan 3");
        assert!(matches!(parse_jhu_reader(header.as_bytes(), "Utopia"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn daily_counts_clamp_revisions() {
        let s = parse_jhu_reader(FIXTURE.as_bytes(), "Atlantis").unwrap();
        let daily = to_daily(&s).unwrap();
        assert_eq!(daily.values, vec![5, 0, 16]);
        assert_eq!(daily.dates[0], d(2021, 1, 2));
        let up = to_daily(&DatedSeries {
            dates: vec![d(2021, 1, 1), d(2021, 1, 2), d(2021, 1, 3)],
            values: vec![1, 3, 7],
        })
        .unwrap();
        assert_eq!(up.values, vec![2, 4]);
    }

    fn long_daily(n: usize) -> DatedSeries {
        DatedSeries {
            dates: d(2021, 9, 1).iter_days().take(n).collect(),
            values: (0..n as i64).collect(),
        }
    }

    #[test]
    fn window_spans_history_and_days() {
        let daily = long_daily(100);
        let start = d(2021, 9, 1) + Duration::days(26);
        let w = window(&daily, start, 35, 26).unwrap();
        assert_eq!(w.history().len() + w.len(), 61);
        assert_eq!(w.history()[0], 0);
        assert_eq!(w.values()[0], 26);
        assert_eq!(*w.values().last().unwrap(), 60);
        assert_eq!(w.dates()[0], start);
    }

    #[test]
    fn window_bounds() {
        let daily = long_daily(70);
        match window(&daily, d(2021, 9, 20), 35, 26) {
            Err(Error::Range(msg)) => assert!(msg.contains("2021-09-27"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(window(&daily, d(2021, 10, 27), 35, 26).is_err());
        assert!(window(&daily, d(2021, 9, 27), 35, 26).is_ok());
        assert!(window(&long_daily(50), d(2021, 9, 27), 35, 26).is_err());
    }

    #[test]
    fn lambda_from_spread() {
        let dates: Vec<NaiveDate> = d(2021, 1, 1).iter_days().take(5).collect();
        let counts = CountSeries::new(dates.clone(), vec![10, 10, 10, 10, 20], vec![]).unwrap();
        // mean 12, squared deviations 4·4 + 64 = 80, variance 80/4 = 20
        let h = lambda_defaults(&counts).unwrap();
        assert!((h.lambda_r - 3.5 * 6f64.sqrt() * 20f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(h.lambda_o, 0.05);
        let flat = CountSeries::new(dates, vec![7; 5], vec![]).unwrap();
        assert!(matches!(lambda_defaults(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn lambda_inversion() {
        // Two values a, a + δ have sample sd δ/√2.
        let sigma = 4.0 / (3.5 * 6f64.sqrt());
        let h = sigma * 2f64.sqrt();
        let z = [0.0, h];
        assert!((sample_sd(&z) - sigma).abs() < 1e-15);
        assert!((3.5 * 6f64.sqrt() * sample_sd(&z) / 4.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_csv_roundtrip() {
        let daily = long_daily(80);
        let w = window(&daily, d(2021, 10, 5), 35, 26).unwrap();
        let mut buf = Vec::new();
        write_window_csv(&w, &mut buf).unwrap();
        let back = read_window_csv(buf.as_slice()).unwrap();
        assert_eq!(back, w);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("date,count,part\n2021-09-09,"));
    }
}
