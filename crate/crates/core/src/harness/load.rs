//! CSV ingestion of grid attributes and raw trajectories.

use std::collections::BTreeMap;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{participant_id, sample_profile, CRIME_EXCLUSION_THRESHOLD};
use crate::domain::{manhattan, CellAttributes, Coord, GridMap, Participant, Schedule, LANDUSE_CATEGORIES};
use crate::error::{Error, Result};

/// Land-use rows whose sum is off by at most this much are renormalized.
pub const LANDUSE_REPAIR_TOLERANCE: f64 = 0.05;

#[derive(Debug, Deserialize)]
struct AttributeRow {
    x: u32,
    y: u32,
    lu_vegetation: f64,
    lu_industrial: f64,
    lu_institutional: f64,
    lu_medical: f64,
    lu_residential: f64,
    lu_commercial: f64,
    crime_count: u32,
}

fn record_line(r: &csv::StringRecord) -> usize {
    r.position().map_or(0, |p| p.line() as usize)
}

/// Reads per-cell attributes. Cells without a row get a uniform land-use mix
/// and no crime; crime counts under the exclusion threshold become 0.
pub fn load_attributes(path: &Path, width: u32, height: u32) -> Result<GridMap> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Invalid(format!("{}: {io}", path.display())),
        other => Error::Invalid(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader.headers()?.clone();
    let mut cells = vec![CellAttributes::uniform(); (width * height) as usize];
    let mut seen = vec![false; cells.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record_line(&rec);
        let row: AttributeRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.x >= width || row.y >= height {
            return Err(Error::Parse {
                line,
                message: format!("cell ({}, {}) outside the {width}x{height} grid", row.x, row.y),
            });
        }
        let idx = (row.y * width + row.x) as usize;
        if seen[idx] {
            return Err(Error::DuplicateCell {
                x: row.x,
                y: row.y,
                line,
            });
        }
        seen[idx] = true;
        let mut mix: [f64; LANDUSE_CATEGORIES] = [
            row.lu_vegetation,
            row.lu_industrial,
            row.lu_institutional,
            row.lu_medical,
            row.lu_residential,
            row.lu_commercial,
        ];
        if mix.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parse {
                line,
                message: "land-use shares must be non-negative".into(),
            });
        }
        let total: f64 = mix.iter().sum();
        if (total - 1.0).abs() > LANDUSE_REPAIR_TOLERANCE {
            return Err(Error::Parse {
                line,
                message: format!("land-use shares sum to {total}"),
            });
        }
        if (total - 1.0).abs() > 1e-9 {
            log::warn!("line {line}: land-use shares sum to {total}; renormalized");
            mix.iter_mut().for_each(|v| *v /= total);
        }
        let crime_count = if row.crime_count < CRIME_EXCLUSION_THRESHOLD {
            0
        } else {
            row.crime_count
        };
        cells[idx] = CellAttributes {
            landuse: mix,
            crime_count,
        };
    }
    GridMap::new(width, height, cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub interval_minutes: u32,
    pub horizon: u32,
    /// Highest speed (cells per step) a participant may need.
    pub speed_cap: u32,
    /// Time origin in seconds; defaults to the earliest timestamp in the file.
    pub start: Option<f64>,
    /// (min_lon, min_lat, max_lon, max_lat) for lon/lat files; defaults to
    /// the data extent.
    pub bbox: Option<(f64, f64, f64, f64)>,
    /// Seed for costs and profiles.
    pub seed: u64,
    pub cost_range: (f64, f64),
}

impl TrajectoryOptions {
    pub fn new(interval_minutes: u32, horizon: u32) -> Self {
        Self {
            interval_minutes,
            horizon,
            speed_cap: 3,
            start: None,
            bbox: None,
            seed: 0,
            cost_range: (1.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLoad {
    pub participants: Vec<Participant>,
    /// Trajectories dropped as infeasible (too fast or outside the horizon).
    pub dropped: usize,
}

/// Seconds from a plain number, `HH:MM[:SS]`, or `YYYY-MM-DD HH:MM:SS`.
/// Dates only shift by whole days, counted from 1970-01-01.
fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (date, clock) = match s.split_once([' ', 'T']) {
        Some((d, c)) => (Some(d), c),
        None => (None, s),
    };
    let parts: Vec<&str> = clock.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let h: f64 = parts[0].parse().ok()?;
    let m: f64 = parts[1].parse().ok()?;
    let sec: f64 = parts.get(2).map_or(Some(0.0), |p| p.parse().ok())?;
    let mut total = h * 3600.0 + m * 60.0 + sec;
    if let Some(d) = date {
        let ymd: Vec<i64> = d.split('-').map(|x| x.parse().ok()).collect::<Option<_>>()?;
        let [y, mo, da] = ymd[..] else { return None };
        total += days_from_civil(y, mo, da) as f64 * 86_400.0;
    }
    Some(total)
}

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

struct Fix {
    a: f64,
    b: f64,
    ts: f64,
}

/// Turns each trajectory into one participant: first point is the origin,
/// last point the destination, and timestamps snapped down to the interval
/// grid give the window (at least one step). Columns are `traj_id,x,y,timestamp` (cell indices)
/// or `traj_id,lon,lat,timestamp` (binned equirectangularly onto the grid).
pub fn load_trajectories(path: &Path, grid: &GridMap, opts: &TrajectoryOptions) -> Result<TrajectoryLoad> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_lowercase()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("traj_id").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing traj_id column".into(),
    })?;
    let (a_col, b_col, geo) = match (col("x"), col("y"), col("lon"), col("lat")) {
        (Some(x), Some(y), _, _) => (x, y, false),
        (_, _, Some(lon), Some(lat)) => (lon, lat, true),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "need x,y or lon,lat columns".into(),
            })
        }
    };
    let t_col = col("timestamp").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing timestamp column".into(),
    })?;

    let mut tracks: BTreeMap<String, Vec<Fix>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let num = |i: usize, what: &str| {
            field(i).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad {what} `{}`", field(i)),
            })
        };
        let ts = parse_timestamp(field(t_col)).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparsable timestamp `{}`", field(t_col)),
        })?;
        let fix = Fix {
            a: num(a_col, if geo { "lon" } else { "x" })?,
            b: num(b_col, if geo { "lat" } else { "y" })?,
            ts,
        };
        tracks.entry(field(id_col).to_string()).or_default().push(fix);
    }

    let all = || tracks.values().flatten();
    let start = opts
        .start
        .unwrap_or_else(|| all().map(|f| f.ts).fold(f64::INFINITY, f64::min));
    let bbox = opts.bbox.unwrap_or_else(|| {
        all().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |b, f| (b.0.min(f.a), b.1.min(f.b), b.2.max(f.a), b.3.max(f.b)),
        )
    });
    let (w, h) = (grid.width(), grid.height());
    let bin = |v: f64, lo: f64, hi: f64, n: u32| -> u32 {
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * f64::from(n)).floor().max(0.0) as u32).min(n - 1)
    };
    let to_cell = |f: &Fix| -> Option<Coord> {
        if geo {
            Some(Coord::new(bin(f.a, bbox.0, bbox.2, w), bin(f.b, bbox.1, bbox.3, h)))
        } else {
            let (x, y) = (f.a, f.b);
            (x >= 0.0 && y >= 0.0 && x < f64::from(w) && y < f64::from(h)).then(|| Coord::new(x as u32, y as u32))
        }
    };
    let step = f64::from(opts.interval_minutes.max(1)) * 60.0;
    let snap = |ts: f64| ((ts - start) / step).floor();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = TrajectoryLoad {
        participants: Vec::new(),
        dropped: 0,
    };
    for fixes in tracks.values_mut() {
        fixes.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        let (first, last) = (&fixes[0], &fixes[fixes.len() - 1]);
        let (Some(o), Some(d)) = (to_cell(first), to_cell(last)) else {
            out.dropped += 1;
            continue;
        };
        let (t0, t1) = (snap(first.ts), snap(last.ts));
        if t0 < 0.0 || t1 > f64::from(opts.horizon) {
            out.dropped += 1;
            continue;
        }
        // A trajectory inside one interval still occupies one step.
        let (depart, arrive) = (t0 as u32, (t1 as u32).max(t0 as u32 + 1));
        if arrive > opts.horizon {
            out.dropped += 1;
            continue;
        }
        let dist = manhattan(o, d);
        let speed = dist.div_ceil(arrive - depart).max(1);
        if speed > opts.speed_cap {
            out.dropped += 1;
            continue;
        }
        let schedule = Schedule::new(o, d, depart, arrive, speed)?;
        let (clo, chi) = opts.cost_range;
        let cost = if chi > clo { rng.random_range(clo..=chi) } else { clo };
        let (profile, preference) = sample_profile(&mut rng);
        let id = participant_id(out.participants.len());
        out.participants.push(Participant::new(
            id,
            schedule,
            (cost * 100.0).round() / 100.0,
            preference,
            0,
            profile,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const HEADER: &str =
        "x,y,lu_vegetation,lu_industrial,lu_institutional,lu_medical,lu_residential,lu_commercial,crime_count\n";

    #[test]
    fn attributes_fill_and_exclusion() {
        let f = file(&format!("{HEADER}0,0,1,0,0,0,0,0,9\n1,1,0,0.49,0,0,0,0.49,25\n"));
        let g = load_attributes(f.path(), 2, 2).unwrap();
        assert_eq!(g.cell(Coord::new(0, 0)).crime_count, 0);
        assert_eq!(g.cell(Coord::new(1, 0)), &CellAttributes::uniform());
        let mixed = g.cell(Coord::new(1, 1));
        assert!((mixed.landuse[1] - 0.5).abs() < 1e-12);
        assert_eq!(mixed.crime_count, 25);
    }

    #[test]
    fn attribute_errors_carry_lines() {
        let f = file(&format!("{HEADER}0,0,1,0,0,0,0,0,0\n0,0,1,0,0,0,0,0,0\n"));
        let e = load_attributes(f.path(), 2, 2).unwrap_err();
        assert_eq!(e.code(), "duplicate_cell");
        assert!(e.to_string().contains("line 3"));
        let f = file(&format!("{HEADER}0,0,abc,0,0,0,0,0,0\n"));
        assert!(load_attributes(f.path(), 2, 2)
            .unwrap_err()
            .to_string()
            .contains("line 2"));
    }

    #[test]
    fn trajectories_snap_and_filter() {
        let grid = GridMap::uniform(4, 4).unwrap();
        let f = file("traj_id,x,y,timestamp\na,1,1,0\na,1,1,60\nb,0,0,0\nb,2,0,2700\nc,0,0,0\nc,3,3,900\n");
        let out = load_trajectories(f.path(), &grid, &TrajectoryOptions::new(15, 8)).unwrap();
        assert_eq!(out.participants.len(), 2);
        assert_eq!(out.dropped, 1);
        let a = &out.participants[0];
        assert_eq!((a.origin(), a.destination()), (Coord::new(1, 1), Coord::new(1, 1)));
        let b = &out.participants[1];
        assert_eq!(b.arrive() - b.depart(), 3);
    }

    #[test]
    fn bad_timestamp_names_line() {
        let grid = GridMap::uniform(4, 4).unwrap();
        let f = file("traj_id,x,y,timestamp\na,1,1,0\na,1,1,noon\n");
        let e = load_trajectories(f.path(), &grid, &TrajectoryOptions::new(15, 8)).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn clock_timestamps() {
        assert_eq!(parse_timestamp("01:30"), Some(5400.0));
        assert_eq!(parse_timestamp("2008-02-02 00:00:10"), Some(13_911.0 * 86_400.0 + 10.0));
        assert_eq!(parse_timestamp("x"), None);
    }
}
