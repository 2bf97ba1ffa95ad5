//! State-dependent action bounds derived from expert rules.
//!
//! A rule maps a state to a box `[a_min(s), a_max(s)]` nested inside the
//! environment's global action box. Actions are saturated onto that box both
//! while exploring and at test time.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Global action box of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ActionSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        check_len("action space", low.len(), high.len())?;
        check_ordered(&low, &high)?;
        Ok(Self { low, high })
    }

    /// `[-1, 1]^dim`, the normalized box used by tanh actors.
    pub fn symmetric(dim: usize) -> Self {
        Self {
            low: vec![-1.0; dim],
            high: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn full_bounds(&self) -> ActionBounds {
        ActionBounds {
            min: self.low.clone(),
            max: self.high.clone(),
        }
    }
}

/// Admissible box `C(s) = [min, max]` for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ActionBounds {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        check_len("action bounds", min.len(), max.len())?;
        check_ordered(&min, &max)?;
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `low <= min <= max <= high` componentwise.
    pub fn nested_in(&self, space: &ActionSpace) -> bool {
        self.dim() == space.dim()
            && (0..self.dim()).all(|i| {
                space.low[i] <= self.min[i]
                    && self.min[i] <= self.max[i]
                    && self.max[i] <= space.high[i]
            })
    }

    pub fn contains(&self, action: &[f64]) -> bool {
        action.len() == self.dim()
            && action
                .iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(&a, (&lo, &hi))| lo <= a && a <= hi)
    }
}

fn check_ordered(lo: &[f64], hi: &[f64]) -> Result<()> {
    for (index, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        // Written so that NaN fails too.
        if !(l <= h) {
            return Err(Error::InvalidInterval {
                index,
                lo: l,
                hi: h,
            });
        }
    }
    Ok(())
}

/// Scalar median of `(lo, x, hi)`, assuming `lo <= hi`.
#[inline]
pub fn clip_scalar(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Elementwise `median(lo, x, hi)`.
pub fn clip(x: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    check_len("clip lower", x.len(), lo.len())?;
    check_len("clip upper", x.len(), hi.len())?;
    check_ordered(lo, hi)?;
    Ok(x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| clip_scalar(v, l, h))
        .collect())
}

/// Outcome of saturating a raw action onto its admissible box.
#[derive(Debug, Clone, PartialEq)]
pub struct Constrained {
    pub applied: Vec<f64>,
    /// `true` where the raw component lay strictly outside the box. An action
    /// exactly on a bound is unsaturated.
    pub saturated: Vec<bool>,
}

impl Constrained {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

pub fn constrain_action(raw: &[f64], bounds: &ActionBounds) -> Constrained {
    debug_assert_eq!(raw.len(), bounds.dim());
    let mut applied = Vec::with_capacity(raw.len());
    let mut saturated = Vec::with_capacity(raw.len());
    for (&r, (&lo, &hi)) in raw.iter().zip(bounds.min.iter().zip(&bounds.max)) {
        let a = clip_scalar(r, lo, hi);
        saturated.push(a != r);
        applied.push(a);
    }
    Constrained { applied, saturated }
}

/// Margins of the comfort rule, in degrees Celsius. The rule starts to bite
/// once the temperature is `m` degrees outside the comfort band and forces
/// full power at `n` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortRuleConfig {
    pub m: f64,
    pub n: f64,
}

impl ComfortRuleConfig {
    pub fn new(m: f64, n: f64) -> Result<Self> {
        let cfg = Self { m, n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::config(
                "rule.m",
                format!("must be finite and >= 0, got {}", self.m),
            ));
        }
        // The ramp divides by n - m, so equal margins are rejected.
        if !(self.n.is_finite() && self.n > self.m) {
            return Err(Error::config(
                "rule.n",
                format!("must be finite and > rule.m ({}), got {}", self.m, self.n),
            ));
        }
        Ok(())
    }

    /// Bounds stay ordered whenever the band is at least `2m` wide.
    pub fn check_band(&self, lower: f64, upper: f64) -> Result<()> {
        if upper - lower < 2.0 * self.m {
            return Err(Error::config(
                "rule.m",
                format!(
                    "comfort band [{lower}, {upper}] narrower than 2m = {}",
                    2.0 * self.m
                ),
            ));
        }
        Ok(())
    }
}

impl Default for ComfortRuleConfig {
    fn default() -> Self {
        Self { m: 0.0, n: 0.25 }
    }
}

/// Quadratic comfort rule for a one-dimensional heating/cooling action in
/// `[-1, 1]`.
///
/// Below `L - m` the lower bound ramps up quadratically and reaches `+1` at
/// `L - n`; above `U + m` the upper bound ramps down to `-1` at `U + n`.
pub fn comfort_bounds(t: f64, lower: f64, upper: f64, cfg: &ComfortRuleConfig) -> ActionBounds {
    let width = cfg.n - cfg.m;
    let cold = clip_scalar(((lower - cfg.m) - t) / width, 0.0, 1.0);
    let hot = clip_scalar((t - (upper + cfg.m)) / width, 0.0, 1.0);
    let a_min = cold * cold * 2.0 - 1.0;
    let a_max = 1.0 - 2.0 * hot * hot;
    ActionBounds {
        min: vec![a_min],
        max: vec![a_max],
    }
}

/// What a comfort rule needs to know about a state.
pub trait ComfortState {
    fn temperature(&self) -> f64;
    fn comfort_band(&self) -> (f64, f64);
}

/// Source of per-state action bounds.
pub trait RuleProvider<S: ?Sized> {
    fn bounds(&self, state: &S) -> ActionBounds;
}

/// Always returns the global box; clipping with it is plain environment
/// clipping.
#[derive(Debug, Clone)]
pub struct GlobalBounds(pub ActionSpace);

impl<S: ?Sized> RuleProvider<S> for GlobalBounds {
    fn bounds(&self, _state: &S) -> ActionBounds {
        self.0.full_bounds()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ComfortRule(pub ComfortRuleConfig);

impl<S: ComfortState + ?Sized> RuleProvider<S> for ComfortRule {
    fn bounds(&self, state: &S) -> ActionBounds {
        let (lower, upper) = state.comfort_band();
        comfort_bounds(state.temperature(), lower, upper, &self.0)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn clip_examples() {
        assert_eq!(clip(&[0.5], &[-1.0], &[1.0]).unwrap(), vec![0.5]);
        assert_eq!(clip(&[1.7], &[-1.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(clip(&[-3.0], &[-1.0], &[-1.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn clip_rejects_inverted_interval() {
        let err = clip(&[0.0, 0.0], &[-1.0, 1.0], &[1.0, 0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidInterval { index: 1, .. }));
    }

    #[test]
    fn comfort_inside_band_is_free() {
        for (m, n) in [(0.0, 1.0), (0.5, 1.0), (0.0, 0.25), (0.2, 0.25)] {
            let b = comfort_bounds(23.0, 21.0, 25.0, &ComfortRuleConfig::new(m, n).unwrap());
            assert_eq!(b.min, vec![-1.0]);
            assert_eq!(b.max, vec![1.0]);
        }
    }

    #[test]
    fn comfort_half_ramp_below() {
        let b = comfort_bounds(20.5, 21.0, 25.0, &ComfortRuleConfig::new(0.0, 1.0).unwrap());
        assert!((b.min[0] - (-0.5)).abs() < 1e-12);
        assert_eq!(b.max[0], 1.0);
    }

    #[test]
    fn comfort_full_saturation_above() {
        let b = comfort_bounds(26.0, 21.0, 25.0, &ComfortRuleConfig::new(0.0, 0.5).unwrap());
        assert_eq!(b.max[0], -1.0);
        assert_eq!(b.min[0], -1.0);
    }

    #[test]
    fn equal_margins_rejected() {
        assert!(ComfortRuleConfig::new(0.5, 0.5).is_err());
        assert!(ComfortRuleConfig::new(-0.1, 0.5).is_err());
        assert!(ComfortRuleConfig::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn narrow_band_flagged() {
        let cfg = ComfortRuleConfig::new(1.0, 2.0).unwrap();
        assert!(cfg.check_band(21.0, 22.5).is_err());
        assert!(cfg.check_band(21.0, 23.0).is_ok());
    }

    #[test]
    fn constrain_examples() {
        let b = ActionBounds::new(vec![-1.0], vec![0.5]).unwrap();
        let c = constrain_action(&[0.9], &b);
        assert_eq!(c.applied, vec![0.5]);
        assert_eq!(c.saturated, vec![true]);

        let c = constrain_action(&[0.0], &ActionSpace::symmetric(1).full_bounds());
        assert_eq!(c.applied, vec![0.0]);
        assert_eq!(c.saturated, vec![false]);

        let b = comfort_bounds(20.5, 21.0, 25.0, &ComfortRuleConfig::new(0.0, 1.0).unwrap());
        let c = constrain_action(&[-0.5], &b);
        assert_eq!(c.applied, vec![-0.5]);
        assert_eq!(c.saturated, vec![false]);
    }

    #[test]
    fn global_provider_matches_plain_clipping() {
        let space = ActionSpace::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let provider = GlobalBounds(space.clone());
        let raw = [1.3, -0.2];
        let via_rule = constrain_action(&raw, &RuleProvider::<()>::bounds(&provider, &()));
        assert_eq!(
            via_rule.applied,
            clip(&raw, space.low(), space.high()).unwrap()
        );
    }

    fn benchmark_pairs() -> Vec<ComfortRuleConfig> {
        [
            (0.0, 1.0),
            (0.5, 1.0),
            (0.0, 0.5),
            (0.25, 0.5),
            (0.0, 0.25),
            (0.2, 0.25),
            (0.0, 0.1),
            (0.075, 0.1),
        ]
        .iter()
        .map(|&(m, n)| ComfortRuleConfig::new(m, n).unwrap())
        .collect()
    }

    proptest! {
        #[test]
        fn bounds_chain_holds(t in 0.0f64..40.0, lower in 15.0f64..23.0, width in 2.0f64..8.0, k in 0usize..8) {
            let cfg = benchmark_pairs()[k];
            let upper = lower + width;
            let b = comfort_bounds(t, lower, upper, &cfg);
            prop_assert!(-1.0 <= b.min[0] && b.min[0] <= b.max[0] && b.max[0] <= 1.0);
            if b.min[0] > -1.0 { prop_assert!(t < lower - cfg.m); }
            if b.max[0] < 1.0 { prop_assert!(t > upper + cfg.m); }
        }

        #[test]
        fn bounds_non_increasing_in_temperature(t in 0.0f64..40.0, dt in 0.0f64..5.0, k in 0usize..8) {
            let cfg = benchmark_pairs()[k];
            let a = comfort_bounds(t, 21.0, 25.0, &cfg);
            let b = comfort_bounds(t + dt, 21.0, 25.0, &cfg);
            prop_assert!(b.min[0] <= a.min[0]);
            prop_assert!(b.max[0] <= a.max[0]);
        }

        #[test]
        fn constrain_is_idempotent(raw in -3.0f64..3.0, t in 0.0f64..40.0, k in 0usize..8) {
            let b = comfort_bounds(t, 21.0, 25.0, &benchmark_pairs()[k]);
            let once = constrain_action(&[raw], &b);
            let twice = constrain_action(&once.applied, &b);
            prop_assert_eq!(&once.applied, &twice.applied);
            prop_assert!(!twice.any_saturated());
            prop_assert!(b.contains(&once.applied));
        }
    }
}
