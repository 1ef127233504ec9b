use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::ProtocolError;

const BUILTIN_PROFILES: &str = include_str!("profiles.toml");

/// Log-normal response latency with a fixed coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimeModel {
    pub mean_s: f64,
    pub cv: f64,
}

impl ResponseTimeModel {
    /// A standardized draw with mean 1; latency is `mean_s * unit_draw`, so
    /// totals are linear in `mean_s` under common random numbers.
    pub fn unit_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.cv <= 0.0 {
            return 1.0;
        }
        let s2 = (1.0 + self.cv * self.cv).ln();
        LogNormal::new(-0.5 * s2, s2.sqrt()).expect("finite parameters").sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean_s * self.unit_draw(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BreakPolicy {
    /// Breaks are logged with zero length.
    #[default]
    None,
    Fixed { seconds: f64 },
    Exponential { mean_s: f64 },
}

impl BreakPolicy {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BreakPolicy::None => 0.0,
            BreakPolicy::Fixed { seconds } => seconds,
            BreakPolicy::Exponential { mean_s } if mean_s > 0.0 => {
                Exp::new(1.0 / mean_s).expect("positive rate").sample(rng)
            }
            BreakPolicy::Exponential { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceProfile {
    #[serde(default)]
    pub name: String,
    pub per_stimulus_processing_s: f64,
    pub feedback_s: f64,
    /// Whether incorrect responses get (negative) feedback of `feedback_s`.
    pub negative_feedback: bool,
    /// Gender task only: showing which side means which answer.
    pub mapping_indication_s: f64,
    pub shows_progress: bool,
    pub response_time: ResponseTimeModel,
    #[serde(default)]
    pub break_policy: BreakPolicy,
}

impl InterfaceProfile {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let checks = [
            ("per_stimulus_processing_s", self.per_stimulus_processing_s),
            ("feedback_s", self.feedback_s),
            ("mapping_indication_s", self.mapping_indication_s),
            ("response_time.mean_s", self.response_time.mean_s),
            ("response_time.cv", self.response_time.cv),
        ];
        for (field, v) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ProtocolError::Config(format!("{}: {field} must be >= 0, got {v}", self.name)));
            }
        }
        let break_ok = match self.break_policy {
            BreakPolicy::None => true,
            BreakPolicy::Fixed { seconds } => seconds.is_finite() && seconds >= 0.0,
            BreakPolicy::Exponential { mean_s } => mean_s.is_finite() && mean_s >= 0.0,
        };
        if !break_ok {
            return Err(ProtocolError::Config(format!("{}: break policy must be non-negative", self.name)));
        }
        Ok(())
    }

    /// All latencies zero: the session lasts exactly as long as its stimuli.
    pub fn zero_latency() -> Self {
        Self {
            name: "zero".into(),
            per_stimulus_processing_s: 0.0,
            feedback_s: 0.0,
            negative_feedback: false,
            mapping_indication_s: 0.0,
            shows_progress: false,
            response_time: ResponseTimeModel { mean_s: 0.0, cv: 0.0 },
            break_policy: BreakPolicy::None,
        }
    }
}

/// Named profiles from a TOML file whose top-level tables are profile names.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: BTreeMap<String, InterfaceProfile>,
}

impl ProfileSet {
    /// The `laptop` and `robot` presets.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_PROFILES).expect("built-in profiles are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ProtocolError> {
        let raw: BTreeMap<String, InterfaceProfile> =
            toml::from_str(text).map_err(|e| ProtocolError::Config(e.to_string()))?;
        let mut profiles = BTreeMap::new();
        for (name, mut p) in raw {
            p.name = name.clone();
            p.validate()?;
            profiles.insert(name, p);
        }
        Ok(Self { profiles })
    }

    pub fn from_path(path: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProtocolError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn get(&self, name: &str) -> Result<&InterfaceProfile, ProtocolError> {
        self.profiles.get(name).ok_or_else(|| ProtocolError::UnknownProfile(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn insert(&mut self, profile: InterfaceProfile) -> Result<(), ProtocolError> {
        profile.validate()?;
        self.profiles.insert(profile.name.clone(), profile);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_presets_carry_interface_latencies() {
        let set = ProfileSet::builtin();
        let laptop = set.get("laptop").unwrap();
        let robot = set.get("robot").unwrap();
        assert_eq!(laptop.per_stimulus_processing_s, 1.0);
        assert_eq!(robot.per_stimulus_processing_s, 2.0);
        assert_eq!(robot.mapping_indication_s, 5.0);
        assert!((1.0..=2.0).contains(&robot.feedback_s));
        assert!(laptop.shows_progress && !robot.shows_progress);
        assert!(!laptop.negative_feedback && robot.negative_feedback);
        assert!(matches!(set.get("tablet"), Err(ProtocolError::UnknownProfile(_))));
    }

    #[test]
    fn negative_latency_rejected() {
        let text = BUILTIN_PROFILES.replacen("feedback_s = 1.5", "feedback_s = -1.5", 1);
        assert!(ProfileSet::from_toml_str(&text).is_err());
    }

    #[test]
    fn response_time_has_requested_mean() {
        let m = ResponseTimeModel { mean_s: 3.0, cv: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean = (0..n).map(|_| m.sample(&mut rng)).sum::<f64>() / n as f64;
        // standard error is 3 * 0.5 / sqrt(n)
        assert!((mean - 3.0).abs() < 4.0 * 1.5 / (n as f64).sqrt(), "{mean}");
        assert_eq!(ResponseTimeModel { mean_s: 2.0, cv: 0.0 }.sample(&mut rng), 2.0);
    }

    #[test]
    fn break_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(BreakPolicy::None.sample(&mut rng), 0.0);
        assert_eq!(BreakPolicy::Fixed { seconds: 30.0 }.sample(&mut rng), 30.0);
        assert!(BreakPolicy::Exponential { mean_s: 10.0 }.sample(&mut rng) >= 0.0);
    }
}
