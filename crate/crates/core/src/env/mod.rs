//! Single-zone room temperature control.
//!
//! The room is a first-order RC model driven by a heater (or chiller), heat
//! exchange with the outdoors, and solar gains. The action is normalized to
//! `[-1, 1]`; in the heating season `-1` is off and `+1` full power, in the
//! cooling season the roles flip.

mod baseline;
mod schedule;
mod weather;

pub use baseline::BangBang;
pub use schedule::{ComfortSchedule, ScheduleSegment, MINUTES_PER_DAY};
pub use weather::{generate_weather, WeatherParams, WeatherSeries};

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::ComfortState;

/// Width of the observation vector.
pub const OBS_DIM: usize = 7;
/// Width of the action vector.
pub const ACTION_DIM: usize = 1;

const T_OUT_RANGE: (f64, f64) = (-20.0, 30.0);
const T_IN_RANGE: (f64, f64) = (10.0, 35.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Heating,
    Cooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Reward weight per kWh.
    pub alpha: f64,
    /// Heating energy per step at full power, kWh.
    pub e_max_heat: f64,
    /// Cooling energy per step at full power, kWh.
    pub e_max_cool: f64,
    /// Thermal capacitance, kWh/°C.
    pub capacitance: f64,
    /// Conductance to the outdoors, kW/°C.
    pub loss_coefficient: f64,
    /// Solar heat input at irradiance 1, kW.
    pub solar_gain: f64,
    pub step_minutes: u32,
    pub season: Season,
    pub episode_days: usize,
    pub schedule: ComfortSchedule,
    pub weather: WeatherParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            e_max_heat: 1.0,
            e_max_cool: 1.0,
            capacitance: 2.5,
            loss_coefficient: 0.1,
            solar_gain: 2.0,
            step_minutes: 15,
            season: Season::Heating,
            episode_days: 3,
            schedule: ComfortSchedule::default(),
            weather: WeatherParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.alpha", self.alpha),
            ("env.e_max_heat", self.e_max_heat),
            ("env.e_max_cool", self.e_max_cool),
            ("env.capacitance", self.capacitance),
            ("env.loss_coefficient", self.loss_coefficient),
            ("env.solar_gain", self.solar_gain),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.step_minutes == 0 || MINUTES_PER_DAY % self.step_minutes != 0 {
            return Err(Error::config("env.step_minutes", "must divide 24 h"));
        }
        if self.episode_days == 0 {
            return Err(Error::config("env.episode_days", "must be >= 1"));
        }
        self.schedule.validate()?;
        self.weather.validate()
    }

    pub fn step_hours(&self) -> f64 {
        self.step_minutes as f64 / 60.0
    }

    pub fn steps_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.step_minutes) as usize
    }

    pub fn episode_steps(&self) -> usize {
        self.episode_days * self.steps_per_day()
    }

    /// Energy drawn for a normalized action.
    pub fn energy(&self, action: f64) -> f64 {
        match self.season {
            Season::Heating => (action + 1.0) / 2.0 * self.e_max_heat,
            Season::Cooling => (1.0 - action) / 2.0 * self.e_max_cool,
        }
    }
}

/// Degrees outside `[lower, upper]`.
pub fn comfort_violation(t: f64, lower: f64, upper: f64) -> f64 {
    (lower - t).max(t - upper).max(0.0)
}

/// `-max{L - T, T - U, 0} - alpha * E`.
pub fn reward(t: f64, lower: f64, upper: f64, energy: f64, alpha: f64) -> f64 {
    -comfort_violation(t, lower, upper) - alpha * energy
}

fn normalize(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Indoor temperature, °C.
    pub temperature: f64,
    pub t_out: f64,
    pub irradiance: f64,
    /// Position in the weather series.
    pub index: usize,
    pub minute_of_day: u32,
    /// Steps taken since reset.
    pub elapsed_steps: usize,
    pub episode_steps: usize,
    pub lower: f64,
    pub upper: f64,
}

impl EnvState {
    pub fn elapsed_minutes(&self, step_minutes: u32) -> u64 {
        self.elapsed_steps as u64 * step_minutes as u64
    }

    /// `[sin, cos]` of the time of day, outdoor temperature, irradiance,
    /// indoor temperature and both comfort bounds, all scaled into `[-1, 1]`.
    pub fn observation(&self) -> Vec<f64> {
        let phase = 2.0 * PI * self.minute_of_day as f64 / MINUTES_PER_DAY as f64;
        vec![
            phase.sin(),
            phase.cos(),
            normalize(self.t_out, T_OUT_RANGE),
            2.0 * self.irradiance - 1.0,
            normalize(self.temperature, T_IN_RANGE),
            normalize(self.lower, T_IN_RANGE),
            normalize(self.upper, T_IN_RANGE),
        ]
    }
}

impl ComfortState for EnvState {
    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn comfort_band(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    /// Energy used during the step, kWh.
    pub energy: f64,
    /// Comfort violation integrated over the step, Kh.
    pub violation_kh: f64,
    /// The episode horizon was reached.
    pub done: bool,
}

/// Environment dynamics bound to one weather series.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    weather: Arc<WeatherSeries>,
}

impl Environment {
    pub fn new(config: EnvConfig, weather: Arc<WeatherSeries>) -> Result<Self> {
        config.validate()?;
        if weather.step_minutes() != config.step_minutes {
            return Err(Error::config(
                "env.step_minutes",
                format!(
                    "weather grid is {} min, config says {}",
                    weather.step_minutes(),
                    config.step_minutes
                ),
            ));
        }
        Ok(Self { config, weather })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn weather(&self) -> &Arc<WeatherSeries> {
        &self.weather
    }

    /// Largest valid episode start index.
    pub fn last_start(&self) -> Option<usize> {
        // One extra weather sample is needed for the final next state.
        self.weather
            .len()
            .checked_sub(self.config.episode_steps() + 1)
    }

    fn state_at(&self, index: usize, temperature: f64, elapsed: usize) -> EnvState {
        let minute_of_day = self.weather.minute_of_day(index);
        let (lower, upper) = self.config.schedule.bounds_at(minute_of_day);
        EnvState {
            temperature,
            t_out: self.weather.t_out()[index],
            irradiance: self.weather.irradiance()[index],
            index,
            minute_of_day,
            elapsed_steps: elapsed,
            episode_steps: self.config.episode_steps(),
            lower,
            upper,
        }
    }

    /// Starts an episode at `start` with the indoor temperature drawn
    /// uniformly inside the comfort band.
    pub fn reset<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Result<EnvState> {
        match self.last_start() {
            Some(last) if start <= last => {}
            _ => {
                return Err(Error::Usage(format!(
                    "episode start {start} leaves the weather horizon ({} samples)",
                    self.weather.len()
                )))
            }
        }
        let (lower, upper) = self
            .config
            .schedule
            .bounds_at(self.weather.minute_of_day(start));
        let t0 = if upper > lower {
            rng.random_range(lower..=upper)
        } else {
            lower
        };
        Ok(self.state_at(start, t0, 0))
    }

    /// Advances one step. The action must already be clipped to `[-1, 1]`.
    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepResult> {
        if action.len() != ACTION_DIM {
            return Err(Error::Dimension {
                context: "environment action",
                expected: ACTION_DIM,
                got: action.len(),
            });
        }
        let a = action[0];
        if !a.is_finite() {
            return Err(Error::Usage(format!("non-finite action {a}")));
        }
        if !(-1.0..=1.0).contains(&a) {
            return Err(Error::Usage(format!("action {a} outside [-1, 1]")));
        }
        let next_index = state.index + 1;
        if next_index >= self.weather.len() {
            return Err(Error::Usage("stepped past the weather horizon".into()));
        }
        let cfg = &self.config;
        let energy = cfg.energy(a);
        let hvac = match cfg.season {
            Season::Heating => energy,
            Season::Cooling => -energy,
        };
        let dt = cfg.step_hours();
        let passive = dt
            * (cfg.solar_gain * state.irradiance
                - cfg.loss_coefficient * (state.temperature - state.t_out));
        let temperature = state.temperature + (hvac + passive) / cfg.capacitance;

        let next = self.state_at(next_index, temperature, state.elapsed_steps + 1);
        let exceed = comfort_violation(temperature, next.lower, next.upper);
        let done = next.elapsed_steps >= next.episode_steps;
        Ok(StepResult {
            reward: -exceed - cfg.alpha * energy,
            energy,
            violation_kh: exceed * dt,
            done,
            state: next,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn flat_env(t_out: f64, irradiance: f64, days: usize) -> Environment {
        let n = days * 96 + 1;
        let w = WeatherSeries::new(15, vec![t_out; n], vec![irradiance; n]).unwrap();
        Environment::new(EnvConfig::default(), Arc::new(w)).unwrap()
    }

    fn state(env: &Environment, t: f64) -> EnvState {
        let mut s = env.reset(0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        s.temperature = t;
        s
    }

    #[test]
    fn energy_endpoints() {
        let mut cfg = EnvConfig {
            e_max_heat: 4.0,
            e_max_cool: 3.0,
            ..EnvConfig::default()
        };
        assert_eq!(cfg.energy(-1.0), 0.0);
        assert_eq!(cfg.energy(1.0), 4.0);
        cfg.season = Season::Cooling;
        assert_eq!(cfg.energy(1.0), 0.0);
        assert_eq!(cfg.energy(-1.0), 3.0);
    }

    #[test]
    fn hand_reward() {
        let r = reward(20.0, 21.0, 25.0, 4.0, 0.05);
        assert!((r - (-1.2)).abs() < 1e-9);
        assert_eq!(reward(22.0, 21.0, 25.0, 0.0, 0.05), 0.0);
    }

    #[test]
    fn reset_is_deterministic_and_in_band() {
        let env = flat_env(5.0, 0.0, 4);
        for seed in 0..50 {
            let a = env.reset(10, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = env.reset(10, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            assert!(a.lower <= a.temperature && a.temperature <= a.upper);
        }
    }

    #[test]
    fn midnight_clock_features() {
        let env = flat_env(5.0, 0.0, 4);
        let s = env.reset(96, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let obs = s.observation();
        assert_eq!(obs[0], 0.0);
        assert_eq!(obs[1], 1.0);
        assert!(obs.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn reset_out_of_range() {
        let env = flat_env(5.0, 0.0, 4);
        assert!(env.reset(96, &mut ChaCha8Rng::seed_from_u64(1)).is_ok());
        assert!(env.reset(97, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn step_rejects_bad_actions() {
        let env = flat_env(5.0, 0.0, 4);
        let s = state(&env, 22.0);
        assert!(env.step(&s, &[f64::NAN]).is_err());
        assert!(env.step(&s, &[1.5]).is_err());
        assert!(env.step(&s, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn heater_off_uses_no_energy() {
        let env = flat_env(5.0, 0.0, 4);
        let r = env.step(&state(&env, 22.0), &[-1.0]).unwrap();
        assert_eq!(r.energy, 0.0);
        let r = env.step(&state(&env, 22.0), &[1.0]).unwrap();
        assert_eq!(r.energy, env.config().e_max_heat);
    }

    #[test]
    fn more_heat_never_cools() {
        let env = flat_env(0.0, 0.3, 4);
        let s = state(&env, 21.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let a = -1.0 + 0.1 * k as f64;
            let t = env.step(&s, &[a.min(1.0)]).unwrap().state.temperature;
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn relaxes_toward_outdoor_temperature() {
        let env = flat_env(5.0, 0.0, 20);
        let mut s = state(&env, 22.0);
        let mut gap = s.temperature - 5.0;
        for _ in 0..(20 * 96 - 1) {
            let r = env.step(&s, &[-1.0]).unwrap();
            let new_gap = r.state.temperature - 5.0;
            assert!(new_gap < gap && new_gap > 0.0);
            gap = new_gap;
            s = r.state;
        }
    }

    #[test]
    fn reward_non_positive_and_violation_accounting() {
        let env = flat_env(-5.0, 0.0, 4);
        let mut s = state(&env, 21.5);
        let mut kh = 0.0;
        let mut degree_steps = 0.0;
        for i in 0..200 {
            let a = if i % 3 == 0 { 0.2 } else { -1.0 };
            let r = env.step(&s, &[a]).unwrap();
            assert!(r.reward <= 0.0);
            let exceed = comfort_violation(r.state.temperature, r.state.lower, r.state.upper);
            assert_eq!(r.reward == 0.0, exceed == 0.0 && r.energy == 0.0);
            kh += r.violation_kh;
            degree_steps += exceed;
            s = r.state;
        }
        assert!(kh > 0.0);
        assert!((kh - degree_steps * 0.25).abs() < 1e-9);
    }

    #[test]
    fn done_at_horizon() {
        let env = flat_env(5.0, 0.0, 4);
        let mut s = env.reset(0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for i in 0..env.config().episode_steps() {
            let r = env.step(&s, &[0.0]).unwrap();
            assert_eq!(r.done, i + 1 == env.config().episode_steps());
            s = r.state;
        }
    }
}
