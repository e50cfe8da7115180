//! The GTFS subset read and written by the pipeline.
//!
//! Only the columns listed on each record type are kept. Files other than
//! stops, routes, trips, stop_times and calendar are carried through verbatim.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const STOPS: &str = "stops.txt";
pub const ROUTES: &str = "routes.txt";
pub const TRIPS: &str = "trips.txt";
pub const STOP_TIMES: &str = "stop_times.txt";
pub const CALENDAR: &str = "calendar.txt";

#[derive(Debug, thiserror::Error)]
pub enum GtfsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing required file")]
    MissingFile { path: PathBuf },
    #[error("{file} line {line}: {reason}")]
    Row {
        file: &'static str,
        line: u64,
        reason: String,
    },
    #[error("invalid time {0:?}, expected HH:MM:SS")]
    Time(String),
}

/// Parses `H:MM:SS` or `HH:MM:SS`; hours past 23 are allowed.
pub fn parse_time(s: &str) -> Result<u32, GtfsError> {
    let bad = || GtfsError::Time(s.to_string());
    let mut parts = s.trim().split(':');
    let mut field = |max: Option<u32>| -> Result<u32, GtfsError> {
        let p = parts.next().ok_or_else(bad)?;
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let v: u32 = p.parse().map_err(|_| bad())?;
        match max {
            Some(m) if v > m || p.len() != 2 => Err(bad()),
            _ => Ok(v),
        }
    };
    let h = field(None)?;
    let m = field(Some(59))?;
    let sec = field(Some(59))?;
    if parts.next().is_some() {
        return Err(bad());
    }
    h.checked_mul(3600)
        .and_then(|v| v.checked_add(m * 60 + sec))
        .ok_or_else(bad)
}

pub fn format_time(t: u32) -> String {
    format!("{:02}:{:02}:{:02}", t / 3600, t / 60 % 60, t % 60)
}

mod hms {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_time(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_time(&s).map_err(serde::de::Error::custom)
    }
}

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other:?}"))),
        }
    }
}

/// `stop_lon`/`stop_lat` hold planar x/y when the run uses a planar frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    #[serde(default)]
    pub stop_name: String,
    pub stop_lat: f64,
    pub stop_lon: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub route_id: String,
    #[serde(default)]
    pub agency_id: String,
    #[serde(default)]
    pub route_short_name: String,
    #[serde(default)]
    pub route_long_name: String,
    pub route_type: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub route_id: String,
    pub service_id: String,
    pub trip_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopTime {
    pub trip_id: String,
    #[serde(with = "hms")]
    pub arrival_time: u32,
    #[serde(with = "hms")]
    pub departure_time: u32,
    pub stop_id: String,
    pub stop_sequence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub service_id: String,
    #[serde(with = "flag")]
    pub monday: bool,
    #[serde(with = "flag")]
    pub tuesday: bool,
    #[serde(with = "flag")]
    pub wednesday: bool,
    #[serde(with = "flag")]
    pub thursday: bool,
    #[serde(with = "flag")]
    pub friday: bool,
    #[serde(with = "flag")]
    pub saturday: bool,
    #[serde(with = "flag")]
    pub sunday: bool,
    pub start_date: String,
    pub end_date: String,
}

impl Calendar {
    pub fn every_day(service_id: impl Into<String>, start_date: &str, end_date: &str) -> Self {
        Self {
            service_id: service_id.into(),
            monday: true,
            tuesday: true,
            wednesday: true,
            thursday: true,
            friday: true,
            saturday: true,
            sunday: true,
            start_date: start_date.to_string(),
            end_date: end_date.to_string(),
        }
    }

    pub fn runs_on(&self, day: Weekday) -> bool {
        [
            self.monday,
            self.tuesday,
            self.wednesday,
            self.thursday,
            self.friday,
            self.saturday,
            self.sunday,
        ][day as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl std::str::FromStr for Weekday {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Weekday::*;
        let day = match s.to_ascii_lowercase().as_str() {
            "monday" | "mon" => Monday,
            "tuesday" | "tue" => Tuesday,
            "wednesday" | "wed" => Wednesday,
            "thursday" | "thu" => Thursday,
            "friday" | "fri" => Friday,
            "saturday" | "sat" => Saturday,
            "sunday" | "sun" => Sunday,
            _ => return Err(format!("unknown weekday {s:?}")),
        };
        Ok(day)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GtfsBundle {
    pub stops: Vec<Stop>,
    pub routes: Vec<Route>,
    pub trips: Vec<Trip>,
    pub stop_times: Vec<StopTime>,
    pub calendar: Vec<Calendar>,
    /// Other files, by name, copied byte for byte.
    pub extra_files: BTreeMap<String, Vec<u8>>,
}

impl GtfsBundle {
    /// Sorts every table into the order used when writing.
    pub fn canonicalize(&mut self) {
        self.stops.sort_by(|a, b| a.stop_id.cmp(&b.stop_id));
        self.routes.sort_by(|a, b| a.route_id.cmp(&b.route_id));
        self.trips
            .sort_by(|a, b| (&a.route_id, &a.trip_id).cmp(&(&b.route_id, &b.trip_id)));
        self.stop_times.sort_by(|a, b| {
            (&a.trip_id, a.stop_sequence).cmp(&(&b.trip_id, b.stop_sequence))
        });
        self.calendar.sort_by(|a, b| a.service_id.cmp(&b.service_id));
    }

    /// Stop times grouped by trip in sequence order.
    pub fn stop_times_by_trip(&self) -> BTreeMap<&str, Vec<&StopTime>> {
        let mut out: BTreeMap<&str, Vec<&StopTime>> = BTreeMap::new();
        for st in &self.stop_times {
            out.entry(st.trip_id.as_str()).or_default().push(st);
        }
        for v in out.values_mut() {
            v.sort_by_key(|s| s.stop_sequence);
        }
        out
    }
}

fn read_table<T: for<'de> Deserialize<'de>>(
    dir: &Path,
    name: &'static str,
    required: bool,
) -> Result<Vec<T>, GtfsError> {
    let path = dir.join(name);
    if !path.exists() {
        return if required {
            Err(GtfsError::MissingFile { path })
        } else {
            Ok(Vec::new())
        };
    }
    let bytes = fs::read(&path).map_err(|source| GtfsError::Io { path: path.clone(), source })?;
    // Some feeds start with a byte-order mark.
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        rows.push(rec.map_err(|e| GtfsError::Row {
            file: name,
            line: i as u64 + 2,
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn write_table<T: Serialize>(dir: &Path, name: &str, rows: &[T], header: &[&str]) -> Result<(), GtfsError> {
    let path = dir.join(name);
    let csv_err = |source| GtfsError::Csv { path: path.clone(), source };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| GtfsError::Io { path: path.clone(), source })
}

const OWN_FILES: [&str; 5] = [STOPS, ROUTES, TRIPS, STOP_TIMES, CALENDAR];

/// Reads a feed directory. `calendar.txt` is optional.
pub fn read_dir(dir: &Path) -> Result<GtfsBundle, GtfsError> {
    let mut bundle = GtfsBundle {
        stops: read_table(dir, STOPS, true)?,
        routes: read_table(dir, ROUTES, true)?,
        trips: read_table(dir, TRIPS, true)?,
        stop_times: read_table(dir, STOP_TIMES, true)?,
        calendar: read_table(dir, CALENDAR, false)?,
        extra_files: BTreeMap::new(),
    };
    let io = |source| GtfsError::Io { path: dir.to_path_buf(), source };
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && name.ends_with(".txt") && !OWN_FILES.contains(&name.as_str()) {
            let bytes = fs::read(entry.path()).map_err(|source| GtfsError::Io { path: entry.path(), source })?;
            bundle.extra_files.insert(name, bytes);
        }
    }
    Ok(bundle)
}

/// Writes the bundle in canonical order, creating `dir` if needed.
pub fn write_dir(bundle: &GtfsBundle, dir: &Path) -> Result<(), GtfsError> {
    fs::create_dir_all(dir).map_err(|source| GtfsError::Io { path: dir.to_path_buf(), source })?;
    let mut b = bundle.clone();
    b.canonicalize();
    write_table(dir, STOPS, &b.stops, &["stop_id", "stop_name", "stop_lat", "stop_lon"])?;
    write_table(
        dir,
        ROUTES,
        &b.routes,
        &["route_id", "agency_id", "route_short_name", "route_long_name", "route_type"],
    )?;
    write_table(dir, TRIPS, &b.trips, &["route_id", "service_id", "trip_id"])?;
    write_table(
        dir,
        STOP_TIMES,
        &b.stop_times,
        &["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"],
    )?;
    if !b.calendar.is_empty() {
        write_table(
            dir,
            CALENDAR,
            &b.calendar,
            &[
                "service_id", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
                "sunday", "start_date", "end_date",
            ],
        )?;
    }
    for (name, bytes) in &b.extra_files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| GtfsError::Io { path, source })?;
    }
    Ok(())
}
