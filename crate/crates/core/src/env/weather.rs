//! Synthetic heating-season weather and its text exchange format.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::schedule::MINUTES_PER_DAY;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherParams {
    /// Outdoor temperature at the start and end of the season, °C.
    pub base_temperature: f64,
    /// How much colder mid-season is than its edges, °C.
    pub seasonal_dip: f64,
    /// Length of the seasonal arc in days.
    pub season_days: f64,
    /// Half peak-to-peak daily swing, °C, warmest at 15:00.
    pub daily_amplitude: f64,
    /// Stationary std of the AR(1) temperature perturbation, °C.
    pub noise_std: f64,
    /// Per-step AR(1) coefficient of the perturbation.
    pub noise_correlation: f64,
    /// Daily clear-sky fraction is drawn from `[1 - cloudiness, 1]`.
    pub cloudiness: f64,
    /// Per-step multiplicative irradiance noise std.
    pub irradiance_noise: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            base_temperature: 8.0,
            seasonal_dip: 8.0,
            season_days: 240.0,
            daily_amplitude: 4.0,
            noise_std: 1.5,
            noise_correlation: 0.99,
            cloudiness: 0.7,
            irradiance_noise: 0.1,
            sunrise_hour: 7.0,
            sunset_hour: 17.0,
        }
    }
}

impl WeatherParams {
    pub fn without_noise(self) -> Self {
        Self {
            noise_std: 0.0,
            cloudiness: 0.0,
            irradiance_noise: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("env.weather.base_temperature", self.base_temperature),
            ("env.weather.seasonal_dip", self.seasonal_dip),
            ("env.weather.daily_amplitude", self.daily_amplitude),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if !(self.season_days > 0.0) {
            return Err(Error::config("env.weather.season_days", "must be > 0"));
        }
        if !(self.noise_std >= 0.0) || !(self.irradiance_noise >= 0.0) {
            return Err(Error::config("env.weather.noise_std", "noise must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err(Error::config(
                "env.weather.noise_correlation",
                "must lie in [0, 1)",
            ));
        }
        if !(0.0..=1.0).contains(&self.cloudiness) {
            return Err(Error::config(
                "env.weather.cloudiness",
                "must lie in [0, 1]",
            ));
        }
        if !(0.0 <= self.sunrise_hour
            && self.sunrise_hour < self.sunset_hour
            && self.sunset_hour <= 24.0)
        {
            return Err(Error::config(
                "env.weather.sunrise_hour",
                "need 0 <= sunrise < sunset <= 24",
            ));
        }
        Ok(())
    }
}

/// Outdoor temperature and normalized irradiance on a regular grid starting
/// at midnight of day 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    step_minutes: u32,
    t_out: Vec<f64>,
    irradiance: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(step_minutes: u32, t_out: Vec<f64>, irradiance: Vec<f64>) -> Result<Self> {
        if step_minutes == 0 || MINUTES_PER_DAY % step_minutes != 0 {
            return Err(Error::config("env.step_minutes", "must divide 24 h"));
        }
        if t_out.len() != irradiance.len() {
            return Err(Error::Dimension {
                context: "weather columns",
                expected: t_out.len(),
                got: irradiance.len(),
            });
        }
        if t_out.iter().chain(&irradiance).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weather sample".into()));
        }
        if irradiance.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Usage("irradiance must lie in [0, 1]".into()));
        }
        Ok(Self {
            step_minutes,
            t_out,
            irradiance,
        })
    }

    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn steps_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.step_minutes) as usize
    }

    pub fn t_out(&self) -> &[f64] {
        &self.t_out
    }

    pub fn irradiance(&self) -> &[f64] {
        &self.irradiance
    }

    pub fn minute_of_day(&self, index: usize) -> u32 {
        ((index as u64 * self.step_minutes as u64) % MINUTES_PER_DAY as u64) as u32
    }

    /// Writes `timestamp_min,t_out,irradiance` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["timestamp_min", "t_out", "irradiance"])?;
        for i in 0..self.len() {
            out.write_record(&[
                (i as u64 * self.step_minutes as u64).to_string(),
                self.t_out[i].to_string(),
                self.irradiance[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`WeatherSeries::write_csv`]. Timestamps
    /// must start at 0 and be evenly spaced.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["timestamp_min", "t_out", "irradiance"] {
            return Err(Error::Usage(format!(
                "unexpected weather header {headers:?}"
            )));
        }
        let mut stamps = Vec::new();
        let mut t_out = Vec::new();
        let mut irr = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Usage(format!("weather field `{}`: {e}", &rec[i])))
            };
            let stamp: u64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Usage(format!("weather timestamp `{}`: {e}", &rec[0])))?;
            stamps.push(stamp);
            t_out.push(parse(1)?);
            irr.push(parse(2)?);
        }
        if stamps.len() < 2 || stamps[0] != 0 {
            return Err(Error::Usage(
                "weather file needs >= 2 rows starting at minute 0".into(),
            ));
        }
        let step = stamps[1];
        if stamps
            .iter()
            .enumerate()
            .any(|(i, &s)| s != i as u64 * step)
        {
            return Err(Error::Usage(
                "weather timestamps are not evenly spaced".into(),
            ));
        }
        let step =
            u32::try_from(step).map_err(|_| Error::Usage("weather step too large".into()))?;
        WeatherSeries::new(step, t_out, irr)
    }
}

/// Generates `days` days of weather: seasonal arc plus daily sinusoid plus
/// correlated noise for temperature, and a noon-peaking solar arc scaled by a
/// daily clear-sky factor for irradiance.
pub fn generate_weather<R: Rng + ?Sized>(
    days: usize,
    step_minutes: u32,
    params: &WeatherParams,
    rng: &mut R,
) -> Result<WeatherSeries> {
    if days == 0 {
        return Err(Error::Usage(
            "weather horizon must be at least one day".into(),
        ));
    }
    params.validate()?;
    if step_minutes == 0 || MINUTES_PER_DAY % step_minutes != 0 {
        return Err(Error::config("env.step_minutes", "must divide 24 h"));
    }
    let per_day = (MINUTES_PER_DAY / step_minutes) as usize;
    let n = days * per_day;
    let mut t_out = Vec::with_capacity(n);
    let mut irr = Vec::with_capacity(n);

    let rho = params.noise_correlation;
    let innovation = params.noise_std * (1.0 - rho * rho).sqrt();
    let mut perturbation = params.noise_std * Distribution::<f64>::sample(&StandardNormal, rng);
    let clear = Uniform::new_inclusive(1.0 - params.cloudiness, 1.0).expect("valid range");
    let mut clear_sky = 1.0;

    for i in 0..n {
        let step_in_day = i % per_day;
        if step_in_day == 0 {
            clear_sky = clear.sample(rng);
        }
        let hour = (step_in_day as f64 * step_minutes as f64) / 60.0;
        let day = i as f64 / per_day as f64;

        let seasonal = params.base_temperature
            - params.seasonal_dip * (PI * day / params.season_days).sin().max(0.0);
        let daily = params.daily_amplitude * (2.0 * PI * (hour - 15.0) / 24.0).cos();
        let z: f64 = StandardNormal.sample(rng);
        perturbation = rho * perturbation + innovation * z;
        t_out.push(seasonal + daily + perturbation);

        let arc = if hour > params.sunrise_hour && hour < params.sunset_hour {
            (PI * (hour - params.sunrise_hour) / (params.sunset_hour - params.sunrise_hour)).sin()
        } else {
            0.0
        };
        let flicker: f64 = StandardNormal.sample(rng);
        let value = arc * clear_sky * (1.0 + params.irradiance_noise * flicker);
        irr.push(value.clamp(0.0, 1.0));
    }
    WeatherSeries::new(step_minutes, t_out, irr)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn no_sun_at_midnight() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w =
            generate_weather(3, 15, &WeatherParams::default().without_noise(), &mut rng).unwrap();
        for d in 0..3 {
            assert_eq!(w.irradiance()[d * 96], 0.0);
        }
        // peak at noon with a clear sky
        assert!((w.irradiance()[48] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_series() {
        let p = WeatherParams::default();
        let a = generate_weather(5, 15, &p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_weather(5, 15, &p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let c = generate_weather(5, 15, &p, &mut ChaCha8Rng::seed_from_u64(43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn irradiance_in_unit_interval() {
        let p = WeatherParams {
            irradiance_noise: 0.8,
            ..WeatherParams::default()
        };
        let w = generate_weather(30, 15, &p, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert!(w.irradiance().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(w.len(), 30 * 96);
    }

    #[test]
    fn zero_days_rejected() {
        assert!(generate_weather(
            0,
            15,
            &WeatherParams::default(),
            &mut ChaCha8Rng::seed_from_u64(1)
        )
        .is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let w = generate_weather(
            2,
            15,
            &WeatherParams::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = WeatherSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn uneven_timestamps_rejected() {
        let text = "timestamp_min,t_out,irradiance\n0,1.0,0.0\n15,1.0,0.0\n45,1.0,0.0\n";
        assert!(WeatherSeries::read_csv(text.as_bytes()).is_err());
    }
}
