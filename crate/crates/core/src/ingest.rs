//! Raw track parsing, daily resampling into fixed windows, normalization into
//! the model's input space, and the trajectory-set CSV format.
//!
//! Track CSV: header `subject_id,timestamp,lon,lat`, ISO-8601 timestamps.
//! Trajectory-set CSV: header `traj_id,day_index,lon,lat`, 0-based day index.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{GeoPoint, Trajectory, TrajectorySet};

/// Default normalization factor: inputs are divided by `0.3 * max|x|`.
pub const DEFAULT_SCALE_FACTOR: f64 = 0.3;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub subject_id: String,
    pub fixes: Vec<Fix>,
}

/// Calendar month and day at which a seasonal window opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    pub fn new(month: u32, day: u32) -> Result<Self> {
        // 2000 is a leap year, so Feb 29 is accepted here.
        NaiveDate::from_ymd_opt(2000, month, day)
            .ok_or_else(|| Error::InvalidArgument(format!("invalid month-day {month:02}-{day:02}")))?;
        Ok(MonthDay { month, day })
    }

    fn in_year(&self, year: i32) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(year, self.month, self.day)
    }
}

impl Default for MonthDay {
    fn default() -> Self {
        MonthDay { month: 3, day: 1 }
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, d) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("expected MM-DD, got {s:?}")))?;
        let month = m
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad month in {s:?}")))?;
        let day = d
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad day in {s:?}")))?;
        MonthDay::new(month, day)
    }
}

impl TryFrom<String> for MonthDay {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MonthDay> for String {
    fn from(md: MonthDay) -> String {
        md.to_string()
    }
}

/// Daily resampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window_start: MonthDay,
    pub window_len_days: usize,
    pub max_gap_days: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_start: MonthDay::default(),
            window_len_days: 185,
            max_gap_days: 7,
        }
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in NAIVE {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&dt).timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| Utc.from_utc_datetime(&dt).timestamp())
}

/// Parses a track CSV and groups rows by subject, each sorted by time.
///
/// Subjects come back in lexicographic order, so the result does not depend
/// on row order.
pub fn parse_tracks<R: Read>(data: R) -> Result<Vec<RawTrack>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::parse(1, format!("missing column {name}")))
    };
    let (c_id, c_ts, c_lon, c_lat) = (
        column("subject_id")?,
        column("timestamp")?,
        column("lon")?,
        column("lat")?,
    );

    let mut groups: BTreeMap<String, Vec<Fix>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let timestamp = parse_timestamp(field(c_ts))
            .ok_or_else(|| Error::parse(line, format!("bad timestamp {:?}", field(c_ts))))?;
        let number = |i: usize, what: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad {what} {:?}", field(i))))
        };
        let lon = number(c_lon, "longitude")?;
        let lat = number(c_lat, "latitude")?;
        let point = GeoPoint::checked(lon, lat).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::parse(line, msg),
            other => other,
        })?;
        groups
            .entry(field(c_id).to_string())
            .or_default()
            .push(Fix { timestamp, point });
    }

    groups
        .into_iter()
        .map(|(subject_id, mut fixes)| {
            fixes.sort_by_key(|f| f.timestamp);
            if let Some(w) = fixes.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate fix for subject {subject_id} at timestamp {}",
                    w[0].timestamp
                )));
            }
            Ok(RawTrack { subject_id, fixes })
        })
        .collect()
}

/// Resamples raw tracks to one point per day inside a seasonal window.
///
/// Each subject-year is a separate sample. The first fix of each UTC day is
/// kept, interior gaps up to `max_gap_days` are linearly interpolated and
/// samples with a longer gap or a missing first/last day are dropped.
pub fn preprocess(tracks: &[RawTrack], window: &WindowConfig) -> Result<TrajectorySet> {
    if window.window_len_days < 2 {
        return Err(Error::InvalidArgument("window_len_days must be at least 2".into()));
    }
    let len = window.window_len_days as i64;
    let mut out = Vec::new();
    for track in tracks {
        if track.fixes.is_empty() {
            continue;
        }
        let day_of = |ts: i64| ts.div_euclid(SECONDS_PER_DAY);
        let first_day = day_of(track.fixes[0].timestamp);
        let last_day = day_of(track.fixes[track.fixes.len() - 1].timestamp);
        let year_of = |day: i64| {
            DateTime::<Utc>::from_timestamp(day * SECONDS_PER_DAY, 0)
                .map_or(1970, |d| d.year())
        };
        for year in year_of(first_day) - 1..=year_of(last_day) {
            let Some(start) = window.window_start.in_year(year) else {
                continue;
            };
            let start_day = start
                .and_hms_opt(0, 0, 0)
                .map(|dt| Utc.from_utc_datetime(&dt).timestamp())
                .map(day_of)
                .unwrap_or_default();
            if start_day + len <= first_day || start_day > last_day {
                continue;
            }
            let mut daily: Vec<Option<GeoPoint>> = vec![None; window.window_len_days];
            for fix in &track.fixes {
                let offset = day_of(fix.timestamp) - start_day;
                if (0..len).contains(&offset) {
                    daily[offset as usize].get_or_insert(fix.point);
                }
            }
            if let Some(points) = fill_gaps(&daily, window.max_gap_days) {
                out.push(Trajectory::new(points)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoEligibleTrajectories);
    }
    TrajectorySet::new(out)
}

fn fill_gaps(daily: &[Option<GeoPoint>], max_gap: usize) -> Option<Vec<GeoPoint>> {
    if daily.first()?.is_none() || daily.last()?.is_none() {
        return None;
    }
    let mut points = Vec::with_capacity(daily.len());
    let mut prev: Option<(usize, GeoPoint)> = None;
    for (i, slot) in daily.iter().enumerate() {
        let Some(p) = *slot else { continue };
        if let Some((j, q)) = prev {
            let gap = i - j - 1;
            if gap > max_gap {
                return None;
            }
            for k in 1..=gap {
                let t = k as f64 / (gap + 1) as f64;
                points.push(GeoPoint::new(
                    q.lon + t * (p.lon - q.lon),
                    q.lat + t * (p.lat - q.lat),
                ));
            }
        }
        points.push(p);
        prev = Some((i, p));
    }
    Some(points)
}

/// Trajectories flattened to rows of `[lon_1, lat_1, lon_2, lat_2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub values: Array2<f64>,
}

impl NormalizedMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub scale: f64,
}

/// Flattens a set into the interleaved layout without scaling.
pub fn flatten(set: &TrajectorySet) -> Array2<f64> {
    let m = set.horizon();
    let mut out = Array2::<f64>::zeros((set.len(), 2 * m));
    for (mut row, traj) in out.rows_mut().into_iter().zip(set) {
        for (j, p) in traj.points.iter().enumerate() {
            row[2 * j] = p.lon;
            row[2 * j + 1] = p.lat;
        }
    }
    out
}

pub fn normalize(set: &TrajectorySet) -> Result<(NormalizedMatrix, NormalizationParams)> {
    normalize_with_factor(set, DEFAULT_SCALE_FACTOR)
}

/// Divides every coordinate by `factor * max|x|` over the whole matrix.
pub fn normalize_with_factor(
    set: &TrajectorySet,
    factor: f64,
) -> Result<(NormalizedMatrix, NormalizationParams)> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty set".into()));
    }
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale factor {factor} must be positive")));
    }
    let raw = flatten(set);
    let max_abs = raw.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max_abs == 0.0 {
        return Err(Error::DegenerateScale);
    }
    let scale = factor * max_abs;
    Ok((
        NormalizedMatrix {
            values: raw / scale,
        },
        NormalizationParams { scale },
    ))
}

pub fn denormalize(matrix: &NormalizedMatrix, params: &NormalizationParams) -> Result<TrajectorySet> {
    let cols = matrix.cols();
    if cols % 2 != 0 {
        return Err(Error::Shape(format!("{cols} columns is not an even count")));
    }
    if matrix.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow("non-finite value in normalized matrix".into()));
    }
    let m = cols / 2;
    let trajectories = matrix
        .values
        .rows()
        .into_iter()
        .map(|row| {
            Trajectory::new(
                (0..m)
                    .map(|j| GeoPoint::new(row[2 * j] * params.scale, row[2 * j + 1] * params.scale))
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectorySet::with_horizon(trajectories, m)
}

pub fn write_trajectory_set<W: Write>(out: W, set: &TrajectorySet) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["traj_id", "day_index", "lon", "lat"])?;
    for (i, traj) in set.iter().enumerate() {
        for (d, p) in traj.points.iter().enumerate() {
            writer.write_record([
                i.to_string(),
                d.to_string(),
                p.lon.to_string(),
                p.lat.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads the `traj_id,day_index,lon,lat` format. A header-only file gives an
/// empty set of horizon 0.
pub fn read_trajectory_set<R: Read>(data: R) -> Result<TrajectorySet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    let headers = reader.headers()?.clone();
    let expected = ["traj_id", "day_index", "lon", "lat"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::parse(1, "expected header traj_id,day_index,lon,lat"));
    }
    let mut groups: BTreeMap<u64, Vec<(usize, GeoPoint)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id: u64 = record[0]
            .parse()
            .map_err(|_| Error::parse(line, "bad traj_id"))?;
        let day: usize = record[1]
            .parse()
            .map_err(|_| Error::parse(line, "bad day_index"))?;
        let lon: f64 = record[2].parse().map_err(|_| Error::parse(line, "bad lon"))?;
        let lat: f64 = record[3].parse().map_err(|_| Error::parse(line, "bad lat"))?;
        groups.entry(id).or_default().push((day, GeoPoint::new(lon, lat)));
    }
    let trajectories = groups
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.0);
            if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {id} does not have contiguous day indices from 0"
                )));
            }
            Trajectory::new(rows.into_iter().map(|r| r.1).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    if trajectories.is_empty() {
        return TrajectorySet::with_horizon(trajectories, 0);
    }
    TrajectorySet::new(trajectories)
}
