//! CSV serialisation of latent paths and point series.
//!
//! Files start with `#` comment lines; `# horizon=T` records the number of
//! time steps so empty steps survive a round trip. Cell indices are 1-based
//! on disk and 0-based in memory.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marg::LatentPath;
use crate::obs::{Event, PointSeries};

const POINT_HEADER: &str = "# coordinates: planar x, y in window units (degrees for geographic data); z = 1-based cell, empty if unallocated";
const PATH_HEADER: &str = "# cells: row-major from the south-west corner, 1-based j";

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    t: usize,
    x: f64,
    y: f64,
    z: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    t: usize,
    j: usize,
    w: f64,
}

/// Split leading `#` lines from the body; returns `(comments, body)`.
fn split_comments<Rd: Read>(reader: Rd) -> Result<(Vec<String>, String)> {
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    Ok((comments, body))
}

fn horizon_from(comments: &[String]) -> Result<Option<usize>> {
    for c in comments {
        if let Some(v) = c.strip_prefix("horizon=") {
            return v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("bad horizon comment '{c}'")));
        }
    }
    Ok(None)
}

pub fn write_point_series<W: Write>(series: &PointSeries<f64>, mut out: W) -> Result<()> {
    writeln!(out, "{POINT_HEADER}")?;
    writeln!(out, "# horizon={}", series.horizon())?;
    let mut w = csv::Writer::from_writer(out);
    for (i, evs) in series.steps().iter().enumerate() {
        for e in evs {
            w.serialize(PointRow {
                t: i + 1,
                x: e.x,
                y: e.y,
                z: e.z.map(|z| z + 1),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a point series; `horizon` overrides the file's horizon comment.
pub fn read_point_series<Rd: Read>(reader: Rd, horizon: Option<usize>) -> Result<PointSeries<f64>> {
    let (comments, body) = split_comments(reader)?;
    let mut rows = Vec::new();
    for r in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let row: PointRow = r?;
        if row.t == 0 || row.z == Some(0) {
            return Err(Error::Format("t and z are 1-based".into()));
        }
        rows.push(row);
    }
    let max_t = rows.iter().map(|r| r.t).max().unwrap_or(0);
    let horizon = horizon.or(horizon_from(&comments)?).unwrap_or(max_t);
    if max_t > horizon {
        return Err(Error::Format(format!("event at t = {max_t} beyond horizon {horizon}")));
    }
    let mut series = PointSeries::empty(horizon);
    for r in rows {
        series.at_mut(r.t).push(Event {
            x: r.x,
            y: r.y,
            z: r.z.map(|z| z - 1),
        });
    }
    Ok(series)
}

pub fn write_latent_path<W: Write>(path: &LatentPath<f64>, mut out: W) -> Result<()> {
    writeln!(out, "{PATH_HEADER}")?;
    writeln!(out, "# horizon={}", path.horizon())?;
    let mut w = csv::Writer::from_writer(out);
    for t in 1..=path.horizon() {
        for (j, &v) in path.row(t).iter().enumerate() {
            w.serialize(PathRow { t, j: j + 1, w: v })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_latent_path<Rd: Read>(reader: Rd) -> Result<LatentPath<f64>> {
    let (_, body) = split_comments(reader)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let row: PathRow = r?;
        if row.t == 0 || row.j == 0 {
            return Err(Error::Format("t and j are 1-based".into()));
        }
        if rows.len() < row.t {
            rows.resize(row.t, Vec::new());
        }
        let cells = &mut rows[row.t - 1];
        if cells.len() != row.j - 1 {
            return Err(Error::Format(format!("cell {} at t = {} out of order", row.j, row.t)));
        }
        cells.push(row.w);
    }
    LatentPath::from_rows(rows).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_series_round_trip_keeps_empty_steps() {
        let mut s = PointSeries::empty(4);
        s.at_mut(2).push(Event { x: 0.25, y: -1.5, z: Some(3) });
        s.at_mut(2).push(Event { x: 1.0 / 3.0, y: 2.0, z: None });
        let mut buf = Vec::new();
        write_point_series(&s, &mut buf).unwrap();
        let back = read_point_series(buf.as_slice(), None).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.horizon(), 4);
    }

    #[test]
    fn latent_path_round_trip() {
        let p = LatentPath::from_rows(vec![vec![0.0, 1.5], vec![2.25, 1e-300]]).unwrap();
        let mut buf = Vec::new();
        write_latent_path(&p, &mut buf).unwrap();
        assert_eq!(read_latent_path(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn rejects_zero_based_cells() {
        let csv = "t,x,y,z\n1,0.5,0.5,0\n";
        assert!(read_point_series(csv.as_bytes(), None).is_err());
    }
}
