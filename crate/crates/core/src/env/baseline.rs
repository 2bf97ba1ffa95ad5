use super::{EnvState, Season};

/// On/off thermostat with hysteresis inside the comfort band: switches the
/// heater on below `L + h`, off above `U - h`, and otherwise keeps its last
/// decision. In the cooling season the chiller plays the heater's role with
/// mirrored thresholds.
#[derive(Debug, Clone)]
pub struct BangBang {
    hysteresis: f64,
    season: Season,
    on: bool,
}

impl BangBang {
    pub fn new(hysteresis: f64, season: Season) -> Self {
        Self {
            hysteresis,
            season,
            on: false,
        }
    }

    pub fn is_on(&self) -> bool {
        self.on
    }

    pub fn set_on(&mut self, on: bool) {
        self.on = on;
    }

    pub fn act(&mut self, state: &EnvState) -> f64 {
        let h = self.hysteresis;
        let t = state.temperature;
        match self.season {
            Season::Heating => {
                if t < state.lower + h {
                    self.on = true;
                } else if t > state.upper - h {
                    self.on = false;
                }
                if self.on {
                    1.0
                } else {
                    -1.0
                }
            }
            Season::Cooling => {
                if t > state.upper - h {
                    self.on = true;
                } else if t < state.lower + h {
                    self.on = false;
                }
                if self.on {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: f64) -> EnvState {
        EnvState {
            temperature: t,
            t_out: 0.0,
            irradiance: 0.0,
            index: 0,
            minute_of_day: 0,
            elapsed_steps: 0,
            episode_steps: 288,
            lower: 21.0,
            upper: 25.0,
        }
    }

    #[test]
    fn heats_below_band() {
        let mut c = BangBang::new(0.5, Season::Heating);
        assert_eq!(c.act(&at(20.0)), 1.0);
    }

    #[test]
    fn stops_above_band() {
        let mut c = BangBang::new(0.5, Season::Heating);
        c.set_on(true);
        assert_eq!(c.act(&at(26.0)), -1.0);
    }

    #[test]
    fn holds_in_mid_band() {
        let mut c = BangBang::new(0.5, Season::Heating);
        assert_eq!(c.act(&at(23.0)), -1.0);
        c.set_on(true);
        assert_eq!(c.act(&at(23.0)), 1.0);
    }

    #[test]
    fn cooling_mirrors() {
        let mut c = BangBang::new(0.5, Season::Cooling);
        assert_eq!(c.act(&at(26.0)), -1.0);
        assert_eq!(c.act(&at(23.0)), -1.0);
        assert_eq!(c.act(&at(21.2)), 1.0);
    }
}
