use serde::{Deserialize, Serialize};

use crate::heuristics::SelectStrategy;
use crate::model::Time;

/// Which cancellation rule a simulated week uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Rigid,
    Ml,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Rigid => "rigid",
            Policy::Ml => "ml",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rigid" => Ok(Policy::Rigid),
            "ml" => Ok(Policy::Ml),
            other => Err(format!("unknown policy `{other}` (expected rigid or ml)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Greedy,
    Exact,
}

impl From<Selector> for SelectStrategy {
    fn from(s: Selector) -> Self {
        match s {
            Selector::Greedy => SelectStrategy::Greedy,
            Selector::Exact => SelectStrategy::Exact,
        }
    }
}

/// Scenario parameters. Offsets are minutes relative to shift start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub shifts: usize,
    pub workers_per_shift: usize,
    pub standbys_per_shift: usize,
    /// Every standby may replace workers of any shift.
    pub global_standby_pool: bool,
    pub late_fraction: f64,
    pub bus_offset_business: Time,
    pub bus_offset_weekend: Time,
    pub late_bus_business: Time,
    pub late_bus_weekend: Time,
    /// Mean of the exponential per-worker delay.
    pub mean_delay: f64,
    pub standby_travel_time: Time,
    pub rigid_cutoff: Time,
    pub walk_to_gate: Time,
    pub walk_to_dispenser: Time,
    pub walk_to_workplace: Time,
    /// Minute of the day at which all shifts start.
    pub shift_start: Time,
    pub shift_length: Time,
    /// Ticks simulated before start and after end of the shift.
    pub day_margin: Time,
    /// Access ensembles are live from `start - access_window` to `end + access_window`.
    pub access_window: Time,
    /// Learned cancellation is live from `start - ml_window` to `end + ml_window`.
    pub ml_window: Time,
    /// Minutes before start at which arrival training data starts being recorded.
    pub collection_lead: Time,
    pub selector: Selector,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            shifts: 3,
            workers_per_shift: 100,
            standbys_per_shift: 80,
            global_standby_pool: true,
            late_fraction: 0.10,
            bus_offset_business: -24,
            bus_offset_weekend: -30,
            late_bus_business: -18,
            late_bus_weekend: -15,
            mean_delay: 5.0,
            standby_travel_time: 30,
            rigid_cutoff: 16,
            walk_to_gate: 3,
            walk_to_dispenser: 2,
            walk_to_workplace: 3,
            shift_start: 480,
            shift_length: 480,
            day_margin: 60,
            access_window: 30,
            ml_window: 30,
            collection_lead: 35,
            selector: Selector::Greedy,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        let negative = [
            ("bus_offset_business", self.bus_offset_business),
            ("bus_offset_weekend", self.bus_offset_weekend),
            ("late_bus_business", self.late_bus_business),
            ("late_bus_weekend", self.late_bus_weekend),
        ];
        if let Some((name, _)) = negative.iter().find(|(_, v)| *v >= 0) {
            return Err(format!("{name} must be negative"));
        }
        if self.standby_travel_time <= 0 {
            return Err("standby_travel_time must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.late_fraction) {
            return Err("late_fraction must lie in [0, 1]".into());
        }
        if !(self.mean_delay >= 0.0 && self.mean_delay.is_finite()) {
            return Err("mean_delay must be finite and non-negative".into());
        }
        if self.shifts == 0 || self.workers_per_shift == 0 {
            return Err("need at least one shift and one worker per shift".into());
        }
        if self.shift_length <= 0 || self.day_margin < 0 || self.collection_lead < 0 {
            return Err("shift_length must be positive, margins non-negative".into());
        }
        if self.shift_start - self.day_margin < 0
            || self.shift_start + self.shift_length + self.day_margin >= 1440
        {
            return Err("the simulated window must stay inside one day".into());
        }
        Ok(())
    }

    pub fn late_count(&self) -> usize {
        ((self.late_fraction * self.workers_per_shift as f64) + 1e-9).floor() as usize
    }

    pub fn is_weekend(day_of_week: usize) -> bool {
        day_of_week >= 5
    }
}
