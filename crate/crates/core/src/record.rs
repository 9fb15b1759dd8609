//! Trajectory and flip records with their CSV schemas.
//!
//! Trajectory files: `t_or_n, x, q1, q2, q3, sqrt_det`.
//! Flip files: `trajectory_id, flip_time, direction`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::spin::BlochState;

pub const TRAJECTORY_HEADER: [&str; 6] = ["t_or_n", "x", "q1", "q2", "q3", "sqrt_det"];
pub const FLIP_HEADER: [&str; 3] = ["trajectory_id", "flip_time", "direction"];

/// Probe measurement outcome; `Plus` moves the walker right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> i64 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

/// Sampled time series of one realization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    /// Step index for discrete walks, time for continuous ones.
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub q3: Vec<f64>,
    pub sqrt_det: Vec<f64>,
    /// Full measurement record, kept only on request.
    pub outcomes: Option<Vec<Outcome>>,
}

impl TrajectoryRecord {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index, ..Default::default() }
    }

    pub fn push(&mut self, time: f64, x: f64, rho: &BlochState) {
        self.times.push(time);
        self.x.push(x);
        self.q1.push(rho.q1);
        self.q2.push(rho.q2);
        self.q3.push(rho.q3);
        self.sqrt_det.push(rho.sqrt_det());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> BlochState {
        BlochState::new(self.q1[i], self.q2[i], self.q3[i])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRAJECTORY_HEADER)?;
        for i in 0..self.len() {
            out.write_record(
                [self.times[i], self.x[i], self.q1[i], self.q2[i], self.q3[i], self.sqrt_det[i]]
                    .map(|v| v.to_string()),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, seed: u64, index: u64) -> csv::Result<Self> {
        let mut rec = Self::new(seed, index);
        let mut reader = csv::Reader::from_reader(r);
        for row in reader.deserialize() {
            let (t, x, q1, q2, q3, sd): (f64, f64, f64, f64, f64, f64) = row?;
            rec.times.push(t);
            rec.x.push(x);
            rec.q1.push(q1);
            rec.q2.push(q2);
            rec.q3.push(q3);
            rec.sqrt_det.push(sd);
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipDirection {
    /// `q3` went from below `-h` to above `+h`.
    Up,
    Down,
}

impl FlipDirection {
    pub fn label(self) -> &'static str {
        match self {
            FlipDirection::Up => "up",
            FlipDirection::Down => "down",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "up" => Some(FlipDirection::Up),
            "down" => Some(FlipDirection::Down),
            _ => None,
        }
    }
}

/// Flip times of one trajectory, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlipRecord {
    pub times: Vec<f64>,
    pub directions: Vec<FlipDirection>,
}

impl FlipRecord {
    pub fn push(&mut self, t: f64, d: FlipDirection) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.directions.push(d);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Waiting times between consecutive flips. The time to the first flip is
    /// not included since it depends on the initial state.
    pub fn inter_flip_times(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn write_flips_csv<W: Write>(w: W, records: &[(u64, &FlipRecord)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FLIP_HEADER)?;
    for (id, rec) in records {
        for (t, d) in rec.times.iter().zip(&rec.directions) {
            out.write_record([id.to_string(), t.to_string(), d.label().to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a flip CSV back into `(trajectory_id, record)` pairs, in file order.
pub fn read_flips_csv<R: Read>(r: R) -> csv::Result<Vec<(u64, FlipRecord)>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out: Vec<(u64, FlipRecord)> = Vec::new();
    for row in reader.deserialize() {
        let (id, t, d): (u64, f64, String) = row?;
        let dir = FlipDirection::parse(&d).unwrap_or(FlipDirection::Up);
        match out.last_mut() {
            Some((last, rec)) if *last == id => rec.push(t, dir),
            _ => {
                let mut rec = FlipRecord::default();
                rec.push(t, dir);
                out.push((id, rec));
            }
        }
    }
    Ok(out)
}

/// Ensemble mean of `sqrt(det rho)` against time or step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecaySeries {
    pub points: Vec<DecayPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub time: f64,
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}
