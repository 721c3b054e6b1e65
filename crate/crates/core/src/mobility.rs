//! Vehicle positions over time: synthetic road layouts or CSV traces.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::radio::wrap_angle;

/// Exact header of the trace CSV.
pub const TRACE_HEADER: [&str; 6] = [
    "time_s",
    "vehicle_id",
    "x_m",
    "y_m",
    "heading_rad",
    "speed_mps",
];

const LANE_OFFSET: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleKinematics {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
    /// m/s.
    pub speed: f64,
    /// Seconds.
    pub timestamp: f64,
}

impl VehicleKinematics {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    GridRoads,
    StraightHighway,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Meters.
    pub extent_x: f64,
    /// Meters.
    pub extent_y: f64,
    pub vehicles: usize,
    /// m/s.
    pub speed_min: f64,
    /// m/s.
    pub speed_max: f64,
    /// Distance between parallel roads of the grid layout, meters; roads run
    /// through the middle of each block so none lies on the wrap boundary.
    pub road_spacing: f64,
    pub trace_path: Option<PathBuf>,
    /// A transmitter pairs with its nearest neighbour within this range, meters.
    pub max_link_distance: f64,
    /// Slots between pairing refreshes.
    pub pairing_refresh: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::GridRoads,
            extent_x: 500.0,
            extent_y: 500.0,
            vehicles: 20,
            speed_min: 8.0,
            speed_max: 14.0,
            road_spacing: 125.0,
            trace_path: None,
            max_link_distance: 150.0,
            pairing_refresh: 800,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent_x > 0.0 && self.extent_y > 0.0) {
            return Err(SimError::config(
                "scenario.extent_x",
                "extent must be positive",
            ));
        }
        if self.kind != ScenarioKind::Trace && self.vehicles < 2 {
            return Err(SimError::config("scenario.vehicles", "must be >= 2"));
        }
        if !(self.speed_min >= 0.0 && self.speed_max >= self.speed_min) {
            return Err(SimError::config(
                "scenario.speed_min",
                "need 0 <= speed_min <= speed_max",
            ));
        }
        if !(self.road_spacing > 0.0) {
            return Err(SimError::config("scenario.road_spacing", "must be > 0"));
        }
        if self.kind == ScenarioKind::Trace && self.trace_path.is_none() {
            return Err(SimError::config(
                "scenario.trace_path",
                "required for kind = trace",
            ));
        }
        if !(self.max_link_distance > 0.0) {
            return Err(SimError::config(
                "scenario.max_link_distance",
                "must be > 0",
            ));
        }
        if self.pairing_refresh < 1 {
            return Err(SimError::config("scenario.pairing_refresh", "must be >= 1"));
        }
        Ok(())
    }
}

/// Places vehicles on the synthetic layout.
pub fn place<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<VehicleKinematics> {
    let roads_x = ((cfg.extent_x / cfg.road_spacing).floor() as usize).max(1);
    let roads_y = ((cfg.extent_y / cfg.road_spacing).floor() as usize).max(1);
    (0..cfg.vehicles)
        .map(|id| {
            let vertical = cfg.kind == ScenarioKind::GridRoads && rng.random_bool(0.5);
            let forward = rng.random_bool(0.5);
            let speed = if cfg.speed_max > cfg.speed_min {
                rng.random_range(cfg.speed_min..cfg.speed_max)
            } else {
                cfg.speed_min
            };
            let lane = if forward { -LANE_OFFSET } else { LANE_OFFSET };
            let (x, y, heading) = if vertical {
                let road = (rng.random_range(0..roads_x) as f64 + 0.5) * cfg.road_spacing;
                let y = rng.random_range(0.0..cfg.extent_y);
                (road - lane, y, if forward { PI / 2.0 } else { -PI / 2.0 })
            } else {
                let road = match cfg.kind {
                    ScenarioKind::GridRoads => {
                        (rng.random_range(0..roads_y) as f64 + 0.5) * cfg.road_spacing
                    }
                    _ => cfg.extent_y / 2.0,
                };
                let x = rng.random_range(0.0..cfg.extent_x);
                (x, road + lane, if forward { 0.0 } else { -PI })
            };
            VehicleKinematics {
                id,
                x: x.rem_euclid(cfg.extent_x),
                y: y.rem_euclid(cfg.extent_y),
                heading,
                speed,
                timestamp: 0.0,
            }
        })
        .collect()
}

/// Constant-speed motion along the heading, wrapping at the extent.
pub fn advance_synthetic(state: &mut [VehicleKinematics], dt: f64, cfg: &ScenarioConfig) {
    for v in state {
        v.x = (v.x + v.speed * dt * v.heading.cos()).rem_euclid(cfg.extent_x);
        v.y = (v.y + v.speed * dt * v.heading.sin()).rem_euclid(cfg.extent_y);
        v.timestamp += dt;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    t: f64,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
}

/// Time-indexed kinematics loaded from a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    by_vehicle: BTreeMap<usize, Vec<Sample>>,
}

impl TraceTable {
    pub fn vehicle_ids(&self) -> Vec<usize> {
        self.by_vehicle.keys().copied().collect()
    }

    pub fn vehicles(&self) -> usize {
        self.by_vehicle.len()
    }

    pub fn trajectory_len(&self, id: usize) -> usize {
        self.by_vehicle.get(&id).map_or(0, Vec::len)
    }

    /// Last instant covered by every trajectory.
    pub fn end_time(&self) -> f64 {
        self.by_vehicle
            .values()
            .map(|s| s.last().map_or(0.0, |x| x.t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation between the samples bracketing `t`.
    pub fn at(&self, id: usize, t: f64) -> Result<VehicleKinematics> {
        let samples = self
            .by_vehicle
            .get(&id)
            .ok_or_else(|| SimError::TraceSchema(format!("unknown vehicle {id}")))?;
        let first = samples[0];
        let last = *samples.last().expect("non-empty");
        if t < first.t || t > last.t {
            return Err(SimError::EndOfScenario(t));
        }
        let i = samples.partition_point(|s| s.t <= t);
        let s = if i >= samples.len() {
            last
        } else {
            let (a, b) = (samples[i - 1], samples[i]);
            let w = (t - a.t) / (b.t - a.t);
            Sample {
                t,
                x: a.x + w * (b.x - a.x),
                y: a.y + w * (b.y - a.y),
                heading: wrap_angle(a.heading + w * wrap_angle(b.heading - a.heading)),
                speed: a.speed + w * (b.speed - a.speed),
            }
        };
        Ok(VehicleKinematics {
            id,
            x: s.x,
            y: s.y,
            heading: s.heading,
            speed: s.speed,
            timestamp: t,
        })
    }

    /// Kinematics of every vehicle at `t`, ordered by id.
    pub fn snapshot(&self, t: f64) -> Result<Vec<VehicleKinematics>> {
        self.by_vehicle.keys().map(|&id| self.at(id, t)).collect()
    }
}

/// Parses a trace CSV (`time_s,vehicle_id,x_m,y_m,heading_rad,speed_mps`).
pub fn load_trace(path: &Path) -> Result<TraceTable> {
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<TraceTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(SimError::TraceSchema("empty trace".into())),
        Some(r) => r.map_err(|e| SimError::TraceParse {
            line: 1,
            reason: e.to_string(),
        })?,
    };
    if header.iter().map(str::trim).ne(TRACE_HEADER) {
        return Err(SimError::TraceSchema(format!(
            "header must be `{}`",
            TRACE_HEADER.join(",")
        )));
    }
    let mut by_vehicle: BTreeMap<usize, Vec<Sample>> = BTreeMap::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| SimError::TraceParse {
            line,
            reason: e.to_string(),
        })?;
        let bad = |reason: String| SimError::TraceParse { line, reason };
        if rec.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k].trim().parse().map_err(|_| {
                bad(format!(
                    "{} is not a number: `{}`",
                    TRACE_HEADER[k], &rec[k]
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("{} must be finite", TRACE_HEADER[k])))
            }
        };
        let id: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("vehicle_id is not an id: `{}`", &rec[1])))?;
        let s = Sample {
            t: num(0)?,
            x: num(2)?,
            y: num(3)?,
            heading: num(4)?,
            speed: num(5)?,
        };
        if s.speed < 0.0 {
            return Err(bad(format!("negative speed {}", s.speed)));
        }
        if !(-PI..PI).contains(&s.heading) {
            return Err(bad(format!("heading {} outside [-pi, pi)", s.heading)));
        }
        let traj = by_vehicle.entry(id).or_default();
        if let Some(prev) = traj.last() {
            if s.t <= prev.t {
                return Err(SimError::TraceSchema(format!(
                    "vehicle {id}: timestamps not increasing at line {line}"
                )));
            }
        }
        traj.push(s);
    }
    if by_vehicle.is_empty() {
        return Err(SimError::TraceSchema("trace has no samples".into()));
    }
    Ok(TraceTable { by_vehicle })
}

/// Nearest other vehicle within `max_distance`, per vehicle; ties go to the
/// lower index.
pub fn pair_nearest(positions: &[(f64, f64)], max_distance: f64) -> Vec<Option<usize>> {
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best: Option<(usize, f64)> = None;
            for (j, q) in positions.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (p.0 - q.0).hypot(p.1 - q.1);
                if d <= max_distance && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            best.map(|(j, _)| j)
        })
        .collect()
}
