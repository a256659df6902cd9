//! Decision boundary of the arrival estimate over (day of week, minutes before start).

use std::io::Write;

use crate::estimates::{EstimateError, Estimator, Horizon};
use crate::factory::{will_arrive_inputs, ScenarioConfig, CANCEL_THRESHOLD};

pub const OFFSETS: std::ops::RangeInclusive<u32> = 1..=30;

/// Predicted arrival probability on the full grid, with derived cutoffs.
///
/// A cutoff is the largest number of minutes before start at which an
/// absent worker gets canceled (probability below the threshold); 0 means the
/// model never cancels before the start.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDump {
    /// `grid[day][m - 1]` for m in 1..=30.
    pub grid: Vec<Vec<f64>>,
    pub day_cutoffs: Vec<u32>,
    pub weekday_cutoff: u32,
    pub weekend_cutoff: u32,
}

fn cutoff(curve: &[f64]) -> u32 {
    OFFSETS
        .zip(curve)
        .filter(|(_, p)| **p < CANCEL_THRESHOLD)
        .map(|(m, _)| m)
        .max()
        .unwrap_or(0)
}

impl BoundaryDump {
    /// Builds the dump from any probability function `p(day_of_week, minutes_before_start)`.
    pub fn from_fn(mut p: impl FnMut(usize, u32) -> f64) -> Self {
        let mut grid: Vec<Vec<f64>> = Vec::with_capacity(7);
        for d in 0..7 {
            grid.push(OFFSETS.map(|m| p(d, m)).collect());
        }
        let day_cutoffs = grid.iter().map(|c| cutoff(c)).collect();
        let mean_curve = |days: std::ops::Range<usize>| -> Vec<f64> {
            let n = days.len() as f64;
            (0..OFFSETS.count())
                .map(|k| days.clone().map(|d| grid[d][k]).sum::<f64>() / n)
                .collect()
        };
        let weekday_cutoff = cutoff(&mean_curve(0..5));
        let weekend_cutoff = cutoff(&mean_curve(5..7));
        Self {
            grid,
            day_cutoffs,
            weekday_cutoff,
            weekend_cutoff,
        }
    }

    /// Evaluates a trained arrival estimator.
    pub fn from_estimator(est: &Estimator) -> Result<Self, EstimateError> {
        let horizon = est.horizon().unwrap_or(Horizon::new(1, 30)?);
        let mut failure = None;
        let dump = Self::from_fn(
            |d, m| match est.predict(&will_arrive_inputs(horizon, d, m)) {
                Ok(p) => p.value(),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(dump),
        }
    }

    /// CSV with one row per grid cell: `day_of_week,weekend,minutes_before_start,probability,cancel`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "day_of_week,weekend,minutes_before_start,probability,cancel"
        )?;
        for (d, curve) in self.grid.iter().enumerate() {
            for (m, p) in OFFSETS.zip(curve) {
                writeln!(
                    out,
                    "{d},{},{m},{p},{}",
                    ScenarioConfig::is_weekend(d) as u8,
                    (*p < CANCEL_THRESHOLD) as u8
                )?;
            }
        }
        out.flush()
    }

    pub fn summary(&self) -> String {
        format!(
            "weekday cutoff {} min, weekend cutoff {} min (per day {:?})",
            self.weekday_cutoff, self.weekend_cutoff, self.day_cutoffs
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_arriving_never_cancels() {
        let b = BoundaryDump::from_fn(|_, _| 1.0);
        assert_eq!(b.weekday_cutoff, 0);
        assert_eq!(b.weekend_cutoff, 0);
        assert!(b.grid.iter().all(|c| c.len() == 30));
    }

    #[test]
    fn threshold_is_extracted() {
        let b = BoundaryDump::from_fn(|_, m| if m >= 13 { 1.0 } else { 0.0 });
        assert_eq!(b.day_cutoffs, vec![12; 7]);
        assert_eq!(b.weekday_cutoff, 12);
    }

    #[test]
    fn never_arriving_cancels_at_the_horizon() {
        let b = BoundaryDump::from_fn(|_, _| 0.0);
        assert_eq!(b.weekend_cutoff, 30);
    }
}
