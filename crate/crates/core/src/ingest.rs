//! Reading point clouds and observation tables, and cutting each
//! observation's buffered focal area out of its cloud.
//!
//! Point files are delimited text (comma or whitespace) with `x y z`
//! columns; an optional header row is recognised by a non-numeric first
//! field. Observations come from a CSV with `id,easting,northing,rh<p>...`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprint::RhVector;
use crate::geom::{Coord, HALF_WIDTH, LOCAL_CENTER, SEARCH_BOUND};

pub const DEFAULT_MIN_POINTS: usize = 100;

/// One return: easting, northing, height above ground (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GeoPoint {
    /// Builds a point, clamping negative heights to the ground.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        GeoPoint {
            x,
            y,
            z: z.max(0.0),
        }
    }

    pub fn xy(&self) -> Coord {
        Coord::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    /// Reported footprint center in the source CRS.
    pub center: Coord,
    pub rh: RhVector,
}

/// One observation unit expressed in the local frame: the reported center
/// sits at (35, 35) and every point lies in `[0, 70]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalArea {
    pub id: String,
    /// Reported center in the source CRS, kept for mapping results back.
    pub source_center: Coord,
    pub reported_center_local: Coord,
    pub half_width: f64,
    pub search_radius: f64,
    pub points: Vec<GeoPoint>,
    pub observed_rh: RhVector,
}

impl FocalArea {
    /// Builds an area directly from local-frame points (already clipped).
    pub fn from_local(id: impl Into<String>, points: Vec<GeoPoint>, observed_rh: RhVector) -> Self {
        FocalArea {
            id: id.into(),
            source_center: LOCAL_CENTER,
            reported_center_local: LOCAL_CENTER,
            half_width: HALF_WIDTH,
            search_radius: SEARCH_BOUND,
            points,
            observed_rh,
        }
    }

    pub fn to_source(&self, local: Coord) -> Coord {
        local - LOCAL_CENTER + self.source_center
    }

    pub fn to_local(&self, source: Coord) -> Coord {
        source - self.source_center + LOCAL_CENTER
    }
}

fn parse_field(field: &str, source_name: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        Error::parse(
            source_name,
            row,
            format!("column {}: '{}' is not a number", col + 1, field.trim()),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::parse(
            source_name,
            row,
            format!("column {}: non-finite value", col + 1),
        ));
    }
    Ok(v)
}

fn split_row(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses delimited `x y z` rows. Rows are numbered from 1 in errors.
pub fn parse_point_cloud<R: Read>(reader: R, source_name: &str) -> Result<Vec<GeoPoint>> {
    let reader = BufReader::new(reader);
    let mut points = Vec::new();
    let mut seen_data_row = false;
    let mut seen_any = false;
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::parse(source_name, row, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_row(trimmed);
        if !seen_any {
            seen_any = true;
            if fields
                .first()
                .is_some_and(|f| f.parse::<f64>().is_err())
            {
                continue;
            }
        }
        if fields.len() < 3 {
            return Err(Error::parse(
                source_name,
                row,
                format!("expected at least 3 columns, found {}", fields.len()),
            ));
        }
        let x = parse_field(fields[0], source_name, row, 0)?;
        let y = parse_field(fields[1], source_name, row, 1)?;
        let z = parse_field(fields[2], source_name, row, 2)?;
        points.push(GeoPoint::new(x, y, z));
        seen_data_row = true;
    }
    if !seen_data_row {
        return Err(Error::EmptyInput(source_name.to_string()));
    }
    Ok(points)
}

pub fn read_point_cloud(path: &Path) -> Result<Vec<GeoPoint>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_point_cloud(f, &path.display().to_string())
}

pub fn write_point_cloud(path: &Path, points: &[GeoPoint]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "x,y,z").map_err(io)?;
    for p in points {
        writeln!(w, "{},{},{}", p.x, p.y, p.z).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn percentile_from_header(col: &str) -> Option<f64> {
    let lower = col.trim().to_ascii_lowercase();
    let p: f64 = lower.strip_prefix("rh")?.parse().ok()?;
    (p > 0.0 && p <= 100.0).then_some(p)
}

/// Formats a percentile as an `rh<p>` column name (`rh50`, `rh97.5`).
pub fn percentile_column(p: f64) -> String {
    format!("rh{p}")
}

/// Parses an observations table. Returns the declared percentile set and
/// one [`Observation`] per data row.
pub fn parse_observations<R: Read>(reader: R, source_name: &str) -> Result<(Vec<f64>, Vec<Observation>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput(source_name.to_string()));
    }
    let expect = ["id", "easting", "northing"];
    for (i, name) in expect.iter().enumerate() {
        if headers.get(i).map(|h| h.to_ascii_lowercase()) != Some(name.to_string()) {
            return Err(Error::parse(
                source_name,
                1,
                format!("column {} must be '{}'", i + 1, name),
            ));
        }
    }
    let mut percentiles = Vec::new();
    for col in headers.iter().skip(3) {
        let p = percentile_from_header(col).ok_or_else(|| {
            Error::parse(source_name, 1, format!("'{col}' is not an rh<percentile> column"))
        })?;
        percentiles.push(p);
    }
    if percentiles.is_empty() {
        return Err(Error::parse(source_name, 1, "no rh<percentile> columns"));
    }
    if percentiles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parse(source_name, 1, "percentile columns must be strictly increasing"));
    }

    let mut observations = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::parse(source_name, row, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::parse(
                source_name,
                row,
                format!("expected {} columns, found {}", headers.len(), record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(source_name, row, "empty id"));
        }
        let easting = parse_field(&record[1], source_name, row, 1)?;
        let northing = parse_field(&record[2], source_name, row, 2)?;
        let values = (3..record.len())
            .map(|c| parse_field(&record[c], source_name, row, c))
            .collect::<Result<Vec<_>>>()?;
        let rh = RhVector::new(percentiles.clone(), values)
            .map_err(|m| Error::parse(source_name, row, m))?;
        observations.push(Observation {
            id,
            center: Coord::new(easting, northing),
            rh,
        });
    }
    if observations.is_empty() {
        return Err(Error::EmptyInput(source_name.to_string()));
    }
    Ok((percentiles, observations))
}

pub fn read_observations(path: &Path) -> Result<(Vec<f64>, Vec<Observation>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_observations(f, &path.display().to_string())
}

pub fn write_observations(path: &Path, percentiles: &[f64], observations: &[Observation]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    let mut header = String::from("id,easting,northing");
    for p in percentiles {
        header.push(',');
        header.push_str(&percentile_column(*p));
    }
    writeln!(w, "{header}").map_err(io)?;
    for o in observations {
        write!(w, "{},{},{}", o.id, o.center.x, o.center.y).map_err(io)?;
        for v in &o.rh.values {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Keeps the points within the 35 m half-width square around the
/// observation's reported center and shifts them so that center lands on
/// (35, 35).
pub fn clip_focal_area(obs: &Observation, cloud: &[GeoPoint], min_points: usize) -> Result<FocalArea> {
    let c = obs.center;
    let points: Vec<GeoPoint> = cloud
        .iter()
        .filter(|p| (p.x - c.x).abs() <= HALF_WIDTH && (p.y - c.y).abs() <= HALF_WIDTH)
        .map(|p| GeoPoint {
            x: (p.x - c.x) + LOCAL_CENTER.x,
            y: (p.y - c.y) + LOCAL_CENTER.y,
            z: p.z,
        })
        .collect();
    if points.len() < min_points {
        return Err(Error::InsufficientCoverage {
            id: obs.id.clone(),
            retained: points.len(),
            required: min_points,
        });
    }
    Ok(FocalArea {
        id: obs.id.clone(),
        source_center: c,
        reported_center_local: LOCAL_CENTER,
        half_width: HALF_WIDTH,
        search_radius: SEARCH_BOUND,
        points,
        observed_rh: obs.rh.clone(),
    })
}

pub fn cloud_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.xyz"))
}

/// Loads every observation's `<id>.xyz` cloud from `cloud_dir` and clips
/// its focal area. Missing clouds are reported together.
pub fn load_focal_areas(
    observations: &[Observation],
    cloud_dir: &Path,
    min_points: usize,
) -> Result<Vec<FocalArea>> {
    let missing: Vec<String> = observations
        .iter()
        .filter(|o| !cloud_path(cloud_dir, &o.id).is_file())
        .map(|o| o.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClouds(missing));
    }
    observations
        .par_iter()
        .map(|o| {
            let cloud = read_point_cloud(&cloud_path(cloud_dir, &o.id))?;
            clip_focal_area(o, &cloud, min_points)
        })
        .collect()
}
