//! MODIS-style detection CSV to monthly point series.

use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use snmarg::obs::{Event, PointSeries};
use snmarg::Rect;

use crate::config::YearMonth;
use crate::error::{CliError, Result};

/// Filters applied while reading detections.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestFilter {
    pub window: Rect<f64>,
    pub confidence: (f64, f64),
    pub start: YearMonth,
    pub horizon: usize,
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
}

/// Row accounting of one ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub kept: usize,
    pub malformed: usize,
    pub outside_window: usize,
    pub low_confidence: usize,
    pub outside_dates: usize,
}

const REQUIRED: [&str; 4] = ["longitude", "latitude", "acq_date", "confidence"];

/// One detection; extra columns of the source file are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub longitude: f64,
    pub latitude: f64,
    pub acq_date: NaiveDate,
    pub confidence: f64,
}

fn parse_row(rec: &csv::StringRecord, idx: &[usize; 4]) -> Option<EventRecord> {
    let f = |i: usize| rec.get(idx[i]).map(str::trim);
    let lon: f64 = f(0)?.parse().ok()?;
    let lat: f64 = f(1)?.parse().ok()?;
    let date = NaiveDate::parse_from_str(f(2)?, "%Y-%m-%d").ok()?;
    let confidence: f64 = f(3)?.parse().ok()?;
    if !(lon.is_finite() && lat.is_finite()) || !(0.0..=100.0).contains(&confidence) {
        return None;
    }
    Some(EventRecord { longitude: lon, latitude: lat, acq_date: date, confidence })
}

/// Read detections, filter them and bin them by calendar month from
/// `filter.start`. Extra columns are ignored; a missing required column is
/// a schema error and more than 10% malformed rows an ingestion error.
pub fn ingest_events<R: Read>(reader: R, filter: &IngestFilter) -> Result<(PointSeries<f64>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Schema(e.to_string()))?.clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CliError::Schema(format!("missing required column `{name}`")))?;
    }

    let first = filter.date_from.unwrap_or(filter.start.first_day());
    let last = filter
        .date_to
        .unwrap_or(filter.start.plus_months(filter.horizon).first_day().pred_opt().expect("representable date"));
    let mut series = PointSeries::empty(filter.horizon);
    let mut report = IngestReport::default();
    for rec in rdr.records() {
        report.rows += 1;
        let Some(row) = rec.ok().as_ref().and_then(|r| parse_row(r, &idx)) else {
            report.malformed += 1;
            continue;
        };
        if !filter.window.contains(row.longitude, row.latitude) {
            report.outside_window += 1;
            continue;
        }
        if row.confidence < filter.confidence.0 || row.confidence > filter.confidence.1 {
            report.low_confidence += 1;
            continue;
        }
        let t = filter.start.index_of(row.acq_date);
        if row.acq_date < first || row.acq_date > last || t < 1 || t as usize > filter.horizon {
            report.outside_dates += 1;
            continue;
        }
        series.at_mut(t as usize).push(Event { x: row.longitude, y: row.latitude, z: None });
        report.kept += 1;
    }
    if report.malformed * 10 > report.rows {
        return Err(CliError::Ingestion { malformed: report.malformed, total: report.rows });
    }
    Ok((series, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter(horizon: usize) -> IngestFilter {
        IngestFilter {
            window: Rect::new(-82.0, -34.0, -40.0, 0.0).unwrap(),
            confidence: (80.0, 100.0),
            start: YearMonth { year: 2019, month: 8 },
            horizon,
            date_from: None,
            date_to: None,
        }
    }

    #[test]
    fn header_only_gives_empty_bins() {
        let (s, r) = ingest_events("longitude,latitude,acq_date,confidence\n".as_bytes(), &filter(3)).unwrap();
        assert_eq!(s.counts(), vec![0, 0, 0]);
        assert_eq!(r.rows, 0);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = ingest_events("longitude,latitude,acq_date\n".as_bytes(), &filter(3)).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)));
    }

    #[test]
    fn filters_and_bins() {
        let csv = "latitude,longitude,brightness,acq_date,confidence\n\
                   -10,-60,300,2019-08-03,85\n\
                   -10,-30,300,2019-08-03,85\n\
                   -10,-60,300,2019-09-30,79\n\
                   -11,-61,300,2019-10-01,100\n\
                   -11,-61,300,2019-11-01,100\n";
        let (s, r) = ingest_events(csv.as_bytes(), &filter(3)).unwrap();
        assert_eq!(s.counts(), vec![1, 0, 1]);
        assert_eq!((r.outside_window, r.low_confidence, r.outside_dates, r.kept), (1, 1, 1, 2));
        assert_eq!(s.at(3)[0].x, -61.0);
    }

    #[test]
    fn too_many_malformed_rows() {
        let mut csv = String::from("longitude,latitude,acq_date,confidence\n");
        for i in 0..9 {
            csv.push_str(&format!("-60,-10,2019-08-0{},90\n", i + 1));
        }
        csv.push_str("-60,-10,not-a-date,90\n");
        assert!(ingest_events(csv.as_bytes(), &filter(2)).is_ok());
        csv.push_str("-60,abc,2019-08-01,90\n");
        assert!(matches!(ingest_events(csv.as_bytes(), &filter(2)), Err(CliError::Ingestion { malformed: 2, total: 11 })));
    }
}
