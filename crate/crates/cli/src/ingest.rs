//! Station and observation files.
//!
//! Stations: header `id,x,y` (planar km) or `id,lat,lon` (degrees), one row
//! per site. Observations: an optional preamble `#unit=ppb` or
//! `#unit=sqrt-ppb` (the default), a header `time,<site-id>...` and one row
//! per hour with integer, consecutive hour stamps. Empty cells are missing.
//! Raw ppb values are square-root transformed on read.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use stdlm_core::model::{DistanceMetric, ObservationPanel, Site, StationSet};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    At {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: {message}")]
    File { file: String, message: String },
}

fn at(file: &str, line: u64, message: impl Into<String>) -> IngestError {
    IngestError::At {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn whole(file: &str, message: impl Into<String>) -> IngestError {
    IngestError::File {
        file: file.to_string(),
        message: message.into(),
    }
}

/// Scale of the values in an observations file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ppb,
    SqrtPpb,
}

impl Unit {
    pub fn tag(self) -> &'static str {
        match self {
            Unit::Ppb => "ppb",
            Unit::SqrtPpb => "sqrt-ppb",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub stations: StationSet,
    /// Rows in station-file order.
    pub panel: ObservationPanel,
    pub unit: Unit,
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn ingest(stations_path: &Path, observations_path: &Path) -> Result<Ingested, IngestError> {
    let stations = parse_stations(&read(stations_path)?, &stations_path.display().to_string())?;
    let (panel, unit) = parse_observations(
        &read(observations_path)?,
        &observations_path.display().to_string(),
        &stations,
    )?;
    Ok(Ingested {
        stations,
        panel,
        unit,
    })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

pub fn parse_stations(text: &str, file: &str) -> Result<StationSet, IngestError> {
    let mut rdr = reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| at(file, 1, e.to_string()))?
        .iter()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    let metric = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["id", "x", "y"] => DistanceMetric::Euclidean,
        ["id", "lat", "lon"] => DistanceMetric::GreatCircle,
        _ => {
            return Err(at(
                file,
                1,
                format!(
                    "header must be `id,x,y` or `id,lat,lon`, found `{}`",
                    header.join(",")
                ),
            ))
        }
    };
    let mut sites: Vec<Site> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| at(file, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(at(
                file,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(at(file, line, "empty site id"));
        }
        if sites.iter().any(|s| s.id == id) {
            return Err(at(file, line, format!("duplicate site id `{id}`")));
        }
        let num = |k: usize| -> Result<f64, IngestError> {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| at(file, line, format!("`{}` is not a number", &rec[k])))
        };
        let coord = [num(1)?, num(2)?];
        if metric == DistanceMetric::GreatCircle
            && (coord[0].abs() > 90.0 || coord[1].abs() > 180.0)
        {
            return Err(at(file, line, "latitude or longitude out of range"));
        }
        if let Some(o) = sites
            .iter()
            .find(|s| metric.distance(s.coord, coord) == 0.0)
        {
            return Err(at(
                file,
                line,
                format!("site `{id}` is collocated with `{}`", o.id),
            ));
        }
        sites.push(Site::new(id, coord));
    }
    if sites.is_empty() {
        return Err(whole(file, "no station rows"));
    }
    StationSet::new(sites, metric).map_err(|e| whole(file, e.to_string()))
}

/// Splits off the optional `#unit=...` preamble; returns the unit and the
/// number of lines consumed.
fn preamble(text: &str, file: &str) -> Result<(Unit, usize, usize), IngestError> {
    let first = text.lines().next().unwrap_or("");
    let trimmed = first.trim();
    if let Some(rest) = trimmed.strip_prefix('#') {
        let unit = match rest.trim().strip_prefix("unit=").map(str::trim) {
            Some("ppb") => Unit::Ppb,
            Some("sqrt-ppb") => Unit::SqrtPpb,
            _ => {
                return Err(at(
                    file,
                    1,
                    format!("preamble must be `#unit=ppb` or `#unit=sqrt-ppb`, found `{trimmed}`"),
                ))
            }
        };
        let offset = text.find('\n').map_or(text.len(), |i| i + 1);
        Ok((unit, offset, 1))
    } else {
        Ok((Unit::SqrtPpb, 0, 0))
    }
}

pub fn parse_observations(
    text: &str,
    file: &str,
    stations: &StationSet,
) -> Result<(ObservationPanel, Unit), IngestError> {
    let (unit, offset, skipped) = preamble(text, file)?;
    let body = &text[offset..];
    let line_of = |l: u64| l + skipped as u64;
    if body.trim().is_empty() {
        return Err(whole(file, "no data rows"));
    }
    let mut rdr = reader(body);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| at(file, line_of(1), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(|h| h.to_ascii_lowercase()) != Some("time".into()) {
        return Err(at(file, line_of(1), "first column must be `time`"));
    }
    let ids = &header[1..];
    let n = stations.len();
    // row of each column in the panel, following the station file
    let mut rows = Vec::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if ids[..k].contains(id) {
            return Err(at(file, line_of(1), format!("duplicate column `{id}`")));
        }
        let row = stations.index_of(id).ok_or_else(|| {
            at(
                file,
                line_of(1),
                format!("column `{id}` is not a known station"),
            )
        })?;
        rows.push(row);
    }
    if let Some(s) = stations.sites().iter().find(|s| !ids.contains(&s.id)) {
        return Err(at(
            file,
            line_of(1),
            format!("station `{}` has no column", s.id),
        ));
    }

    let mut times: Vec<i64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            at(
                file,
                line_of(e.position().map_or(0, |p| p.line())),
                e.to_string(),
            )
        })?;
        let line = line_of(rec.position().map_or(0, |p| p.line()));
        if rec.len() != header.len() {
            return Err(at(
                file,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let t: i64 = rec[0].parse().map_err(|_| {
            at(
                file,
                line,
                format!("time `{}` is not an integer hour", &rec[0]),
            )
        })?;
        if let Some(&prev) = times.last() {
            if t != prev + 1 {
                return Err(at(
                    file,
                    line,
                    format!("time {t} does not follow {prev}; hours must be consecutive"),
                ));
            }
        }
        times.push(t);
        let mut col = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for (k, &row) in rows.iter().enumerate() {
            let cell = &rec[k + 1];
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| at(file, line, format!("`{cell}` is not a number")))?;
            let v = match unit {
                Unit::Ppb if v < 0.0 => {
                    return Err(at(file, line, format!("negative concentration {v}")))
                }
                Unit::Ppb => v.sqrt(),
                Unit::SqrtPpb => v,
            };
            col[row] = v;
            seen[row] = true;
        }
        values.extend(col);
        mask.extend(seen);
    }
    if times.is_empty() {
        return Err(whole(file, "no data rows"));
    }
    let big_t = times.len();
    let y = DMatrix::from_column_slice(n, big_t, &values);
    let m = DMatrix::from_column_slice(n, big_t, &mask);
    let panel = ObservationPanel::new(y, m, times).map_err(|e| whole(file, e.to_string()))?;
    Ok((panel, unit))
}

/// Writes a stations file in the planar or geographic layout of `stations`.
pub fn write_stations(path: &Path, stations: &StationSet) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match stations.metric() {
        DistanceMetric::Euclidean => w.write_record(["id", "x", "y"])?,
        DistanceMetric::GreatCircle => w.write_record(["id", "lat", "lon"])?,
    }
    for s in stations.sites() {
        w.write_record([s.id.clone(), s.coord[0].to_string(), s.coord[1].to_string()])?;
    }
    w.flush()
}

/// Writes a panel on the square-root scale; missing entries become empty
/// cells.
pub fn write_observations(
    path: &Path,
    stations: &StationSet,
    panel: &ObservationPanel,
) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "#unit=sqrt-ppb")?;
    let mut w = csv::Writer::from_writer(f);
    let mut header = vec!["time".to_string()];
    header.extend(stations.sites().iter().map(|s| s.id.clone()));
    w.write_record(&header)?;
    for (c, t) in panel.t_index().iter().enumerate() {
        let mut row = vec![t.to_string()];
        for i in 0..panel.n_sites() {
            row.push(if panel.is_observed(i, c) {
                panel.values()[(i, c)].to_string()
            } else {
                String::new()
            });
        }
        w.write_record(&row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sites() -> StationSet {
        parse_stations("id,x,y\na,0,0\nb,3,4\n", "s.csv").unwrap()
    }

    #[test]
    fn planar_and_geographic_headers() {
        let s = two_sites();
        assert_eq!(s.metric(), DistanceMetric::Euclidean);
        assert_eq!(s.distances()[(0, 1)], 5.0);
        let g = parse_stations("id,lat,lon\np,34.0,-118.2\nq,34.1,-118.3\n", "g.csv").unwrap();
        assert_eq!(g.metric(), DistanceMetric::GreatCircle);
        assert!(parse_stations("name,x,y\na,0,0\n", "s.csv").is_err());
    }

    #[test]
    fn station_errors_carry_line_numbers() {
        let e = parse_stations("id,x,y\na,0,0\na,1,1\n", "s.csv").unwrap_err();
        assert_eq!(e.to_string(), "s.csv:3: duplicate site id `a`");
        let e = parse_stations("id,x,y\na,0,0\nb,zz,1\n", "s.csv").unwrap_err();
        assert!(e.to_string().starts_with("s.csv:3:"), "{e}");
        let e = parse_stations("id,x,y\na,0,0\nb,0,0\n", "s.csv").unwrap_err();
        assert!(e.to_string().contains("collocated"));
    }

    #[test]
    fn empty_observations_have_no_data_rows() {
        let s = two_sites();
        for text in ["", "#unit=ppb\n", "time,a,b\n", "#unit=ppb\ntime,a,b\n"] {
            let e = parse_observations(text, "o.csv", &s).unwrap_err();
            assert!(e.to_string().contains("no data rows"), "{text:?}: {e}");
        }
    }

    #[test]
    fn ppb_values_are_square_rooted() {
        let s = two_sites();
        let (p, unit) =
            parse_observations("#unit=ppb\ntime,b,a\n1,81,16\n2,,4\n", "o.csv", &s).unwrap();
        assert_eq!(unit, Unit::Ppb);
        assert_eq!(p.values()[(0, 0)], 4.0);
        assert_eq!(p.values()[(1, 0)], 9.0);
        assert!(!p.is_observed(1, 1));
        assert_eq!(p.values()[(0, 1)], 2.0);
        assert_eq!(p.t_index(), &[1, 2]);
    }

    #[test]
    fn time_must_run_hour_by_hour() {
        let s = two_sites();
        let e = parse_observations("time,a,b\n1,1,1\n3,1,1\n", "o.csv", &s).unwrap_err();
        assert!(e.to_string().starts_with("o.csv:3:"), "{e}");
        let e = parse_observations("#unit=sqrt-ppb\ntime,a,b\n5,1,1\n4,1,1\n", "o.csv", &s)
            .unwrap_err();
        assert!(e.to_string().starts_with("o.csv:4:"), "{e}");
    }

    #[test]
    fn columns_must_match_stations() {
        let s = two_sites();
        assert!(parse_observations("time,a\n1,1\n", "o.csv", &s).is_err());
        assert!(parse_observations("time,a,b,c\n1,1,1,1\n", "o.csv", &s).is_err());
        assert!(parse_observations("time,a,a\n1,1,1\n", "o.csv", &s).is_err());
        assert!(parse_observations("#unit=furlongs\ntime,a,b\n1,1,1\n", "o.csv", &s).is_err());
        let e = parse_observations("#unit=ppb\ntime,a,b\n1,-1,1\n", "o.csv", &s).unwrap_err();
        assert!(e.to_string().contains("negative"));
    }
}
