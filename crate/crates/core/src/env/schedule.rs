use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 24 * 60;

/// Constant comfort band over `[start_minute, end_minute)` of each day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub start_minute: u32,
    pub end_minute: u32,
    pub lower: f64,
    pub upper: f64,
}

/// Piecewise-constant daily comfort bounds. Segments must tile the day
/// exactly once; a segment may not wrap past midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortSchedule {
    pub segments: Vec<ScheduleSegment>,
}

impl Default for ComfortSchedule {
    /// `[19, 26]` from 08:00 to 20:00, `[21, 25]` otherwise.
    fn default() -> Self {
        let night = |start_minute, end_minute| ScheduleSegment {
            start_minute,
            end_minute,
            lower: 21.0,
            upper: 25.0,
        };
        Self {
            segments: vec![
                night(0, 8 * 60),
                ScheduleSegment {
                    start_minute: 8 * 60,
                    end_minute: 20 * 60,
                    lower: 19.0,
                    upper: 26.0,
                },
                night(20 * 60, MINUTES_PER_DAY),
            ],
        }
    }
}

impl ComfortSchedule {
    pub fn constant(lower: f64, upper: f64) -> Self {
        Self {
            segments: vec![ScheduleSegment {
                start_minute: 0,
                end_minute: MINUTES_PER_DAY,
                lower,
                upper,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = "env.schedule.segments";
        if self.segments.is_empty() {
            return Err(Error::config(key, "at least one segment required"));
        }
        let mut sorted = self.segments.clone();
        sorted.sort_by_key(|s| s.start_minute);
        let mut cursor = 0;
        for s in &sorted {
            if s.end_minute <= s.start_minute || s.end_minute > MINUTES_PER_DAY {
                return Err(Error::config(
                    key,
                    format!(
                        "segment [{}, {}) is empty or leaves the day",
                        s.start_minute, s.end_minute
                    ),
                ));
            }
            if s.start_minute < cursor {
                return Err(Error::config(
                    key,
                    format!(
                        "segment starting at minute {} overlaps its predecessor",
                        s.start_minute
                    ),
                ));
            }
            if s.start_minute > cursor {
                return Err(Error::config(
                    key,
                    format!("no segment covers minute {cursor}"),
                ));
            }
            if !(s.lower.is_finite() && s.upper.is_finite() && s.lower <= s.upper) {
                return Err(Error::config(
                    key,
                    format!("bounds [{}, {}] not ordered", s.lower, s.upper),
                ));
            }
            cursor = s.end_minute;
        }
        if cursor != MINUTES_PER_DAY {
            return Err(Error::config(
                key,
                format!("no segment covers minute {cursor}"),
            ));
        }
        Ok(())
    }

    /// Comfort bounds `(L, U)` at a minute of the day.
    pub fn bounds_at(&self, minute_of_day: u32) -> (f64, f64) {
        let minute = minute_of_day % MINUTES_PER_DAY;
        self.segments
            .iter()
            .find(|s| s.start_minute <= minute && minute < s.end_minute)
            .map(|s| (s.lower, s.upper))
            .expect("validated schedule covers the day")
    }

    pub fn narrowest_band(&self) -> (f64, f64) {
        self.segments
            .iter()
            .map(|s| (s.lower, s.upper))
            .min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
            .expect("non-empty schedule")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lookup() {
        let s = ComfortSchedule::default();
        s.validate().unwrap();
        assert_eq!(s.bounds_at(12 * 60), (19.0, 26.0));
        assert_eq!(s.bounds_at(21 * 60), (21.0, 25.0));
        assert_eq!(s.bounds_at(20 * 60), (21.0, 25.0));
        assert_eq!(s.bounds_at(0), (21.0, 25.0));
        assert_eq!(s.bounds_at(8 * 60), (19.0, 26.0));
    }

    #[test]
    fn constant_schedule() {
        let s = ComfortSchedule::constant(21.0, 25.0);
        s.validate().unwrap();
        for m in (0..MINUTES_PER_DAY).step_by(15) {
            assert_eq!(s.bounds_at(m), (21.0, 25.0));
        }
    }

    #[test]
    fn overlap_rejected() {
        let mut s = ComfortSchedule::default();
        s.segments[1].start_minute = 7 * 60;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("overlaps"), "{err}");
    }

    #[test]
    fn gap_rejected() {
        let mut s = ComfortSchedule::default();
        s.segments[1].start_minute = 9 * 60;
        assert!(s.validate().is_err());
    }
}
