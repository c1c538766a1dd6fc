use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};

use crate::data::{PanelSeries, TimeSeries};
use crate::error::{Error, Result};
use crate::features::{NwpGrid, NwpVariable};

pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub fn format_time(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
}

fn schema(path: &Path, row: usize, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{}: row {row}: {msg}", path.display()))
}

fn parse_f64(path: &Path, row: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| schema(path, row, format!("'{field}' is not a finite number")))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Reads `timestamp,id1,id2,...` with contiguous, evenly spaced rows.
pub fn read_panel_csv(path: &Path) -> Result<PanelSeries> {
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || headers.get(0) != Some("timestamp") {
        return Err(schema(path, 1, "header must be 'timestamp' followed by one column per series"));
    }
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(schema(path, row, format!("expected {} fields, got {}", headers.len(), rec.len())));
        }
        let t = parse_time(&rec[0]).ok_or_else(|| schema(path, row, format!("bad timestamp '{}'", &rec[0])))?;
        if times.len() >= 2 && t - times[times.len() - 1] != times[1] - times[0] {
            return Err(schema(path, row, "timestamps are not evenly spaced"));
        }
        if times.last().is_some_and(|&p| t <= p) {
            return Err(schema(path, row, "timestamps must increase"));
        }
        times.push(t);
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse_f64(path, row, &rec[c + 1])?);
        }
    }
    if times.is_empty() {
        return Err(schema(path, 2, "no data rows"));
    }
    let step = if times.len() > 1 { times[1] - times[0] } else { Duration::hours(1) };
    let series = cols.into_iter().map(|v| TimeSeries::new(times[0], step, v)).collect::<Result<Vec<_>>>()?;
    PanelSeries::new(ids, series)
}

pub fn panel_csv(panel: &PanelSeries) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["timestamp".to_string()];
    header.extend(panel.ids().iter().cloned());
    w.write_record(&header)?;
    for (i, t) in panel.timestamps().into_iter().enumerate() {
        let mut rec = vec![format_time(t)];
        rec.extend(panel.series().iter().map(|s| s.values()[i].to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let panel = read_panel_csv(path)?;
    if panel.n() != 1 {
        return Err(schema(path, 1, "expected exactly one value column"));
    }
    Ok(panel.series()[0].clone())
}

/// Long format `run,lead,lat,lon,variable,value`, one row per grid cell.
pub fn read_nwp_csv(path: &Path) -> Result<NwpGrid> {
    let mut rdr = open(path)?;
    let expected = ["run", "lead", "lat", "lon", "variable", "value"];
    if rdr.headers()?.iter().collect::<Vec<_>>() != expected {
        return Err(schema(path, 1, format!("header must be {}", expected.join(","))));
    }
    let mut cells: BTreeMap<(NaiveDateTime, u32, usize, NwpVariable), f64> = BTreeMap::new();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != 6 {
            return Err(schema(path, row, format!("expected 6 fields, got {}", rec.len())));
        }
        let run = parse_time(&rec[0]).ok_or_else(|| schema(path, row, format!("bad run time '{}'", &rec[0])))?;
        let lead: u32 = rec[1].trim().parse().map_err(|_| schema(path, row, format!("bad lead '{}'", &rec[1])))?;
        let pt = (parse_f64(path, row, &rec[2])?, parse_f64(path, row, &rec[3])?);
        let var = NwpVariable::from_name(rec[4].trim())
            .ok_or_else(|| schema(path, row, format!("unknown variable '{}'", &rec[4])))?;
        let value = parse_f64(path, row, &rec[5])?;
        let p = match points.iter().position(|&q| q == pt) {
            Some(p) => p,
            None => {
                points.push(pt);
                points.len() - 1
            }
        };
        if cells.insert((run, lead, p, var), value).is_some() {
            return Err(schema(path, row, "duplicate grid cell"));
        }
    }
    let mut runs: Vec<NaiveDateTime> = cells.keys().map(|k| k.0).collect();
    runs.dedup();
    let mut leads: Vec<u32> = cells.keys().map(|k| k.1).collect();
    leads.sort_unstable();
    leads.dedup();
    let mut vars: Vec<NwpVariable> = cells.keys().map(|k| k.3).collect();
    vars.sort_unstable();
    vars.dedup();
    let mut data = Vec::with_capacity(runs.len() * leads.len() * points.len() * vars.len());
    for &r in &runs {
        for &l in &leads {
            for p in 0..points.len() {
                for &v in &vars {
                    let value = cells.get(&(r, l, p, v)).ok_or_else(|| {
                        Error::Schema(format!("{}: grid is incomplete, missing {} {r} lead {l}", path.display(), v.name()))
                    })?;
                    data.push(*value);
                }
            }
        }
    }
    NwpGrid::new(runs, leads, points, vars, data)
}

pub fn nwp_csv(grid: &NwpGrid) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "lead", "lat", "lon", "variable", "value"])?;
    for (r, run) in grid.runs().iter().enumerate() {
        for (l, lead) in grid.lead_times().iter().enumerate() {
            for (p, pt) in grid.points().iter().enumerate() {
                for (v, var) in grid.variables().iter().enumerate() {
                    w.write_record([
                        format_time(*run),
                        lead.to_string(),
                        pt.0.to_string(),
                        pt.1.to_string(),
                        var.name().to_string(),
                        grid.get(r, l, p, v).to_string(),
                    ])?;
                }
            }
        }
    }
    finish(w)
}

/// Serializes rows of display-able fields with a header.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Files produced by a command, held in memory until the run succeeds.
#[derive(Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Writes every file to a temporary sibling and renames them into
    /// place; on failure the files already moved are removed again.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut staged = Vec::new();
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut done: Vec<PathBuf> = Vec::new();
        for (tmp, target) in staged {
            if let Err(e) = tmp.persist(&target) {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::Io(e.error));
            }
            done.push(target);
        }
        Ok(done)
    }
}
