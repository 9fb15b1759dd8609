//! Hysteresis detection of gyroscope flips on the `q3` series.

use crate::record::{FlipDirection, FlipRecord};

pub const DEFAULT_HYSTERESIS: f64 = 0.8;

/// Incremental detector: a flip is a passage from above `+h` to below `-h`
/// or the reverse. Excursions inside `(-h, h)` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipDetector {
    h: f64,
    basin: Option<FlipDirection>,
    record: FlipRecord,
}

impl FlipDetector {
    pub fn new(h: f64) -> Self {
        assert!(h > 0.0 && h < 1.0, "hysteresis must lie in (0, 1), got {h}");
        Self { h, basin: None, record: FlipRecord::default() }
    }

    #[inline]
    pub fn push(&mut self, t: f64, q3: f64) {
        let now = if q3 > self.h {
            FlipDirection::Up
        } else if q3 < -self.h {
            FlipDirection::Down
        } else {
            return;
        };
        match self.basin {
            Some(b) if b != now => {
                self.record.push(t, now);
                self.basin = Some(now);
            }
            None => self.basin = Some(now),
            _ => {}
        }
    }

    pub fn record(&self) -> &FlipRecord {
        &self.record
    }

    pub fn finish(self) -> FlipRecord {
        self.record
    }
}

pub fn flip_detector(times: &[f64], q3: &[f64], h: f64) -> FlipRecord {
    let mut d = FlipDetector::new(h);
    for (&t, &q) in times.iter().zip(q3) {
        d.push(t, q);
    }
    d.finish()
}
