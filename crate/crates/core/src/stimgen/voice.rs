//! Reference voice, vowel/consonant prototypes and the CV syllable inventory.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StimError;

const DEFAULT_VOICE: &str = include_str!("default_voice.toml");

pub const MIN_SYLLABLE_MS: f64 = 142.0;
pub const MAX_SYLLABLE_MS: f64 = 200.0;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VowelPrototype {
    pub id: String,
    pub formants_hz: [f64; 4],
    pub bandwidths_hz: [f64; 4],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ConsonantKind {
    VoicelessStop,
    VoicedStop,
    Fricative,
    Nasal,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConsonantPrototype {
    pub id: String,
    pub kind: ConsonantKind,
    pub duration_ms: f64,
    pub resonances_hz: [f64; 2],
    pub bandwidths_hz: [f64; 2],
    pub gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WordDef {
    pub id: String,
    pub syllables: Vec<[String; 2]>,
}

/// The unmodified talker: F0 plus per-vowel formant structure.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReferenceVoice {
    pub f0_hz: f64,
    pub vowels: Vec<VowelPrototype>,
    pub consonants: Vec<ConsonantPrototype>,
}

impl ReferenceVoice {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<(), StimError> {
        if !(self.f0_hz.is_finite() && self.f0_hz > 0.0) {
            return Err(StimError::Config(format!("f0_hz must be positive, got {}", self.f0_hz)));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        for v in &self.vowels {
            if v.formants_hz.windows(2).any(|w| w[0] >= w[1]) {
                return Err(StimError::Config(format!(
                    "vowel {}: formants must be strictly increasing",
                    v.id
                )));
            }
            if v.formants_hz.iter().any(|&f| f <= 0.0 || f >= nyquist) {
                return Err(StimError::Config(format!(
                    "vowel {}: formants must lie in (0, {nyquist}) Hz",
                    v.id
                )));
            }
            if v.bandwidths_hz.iter().any(|&b| b.is_nan() || b <= 0.0) {
                return Err(StimError::Config(format!("vowel {}: bandwidths must be positive", v.id)));
            }
        }
        for c in &self.consonants {
            if c.resonances_hz.iter().chain(&c.bandwidths_hz).any(|&f| f.is_nan() || f <= 0.0) || c.duration_ms <= 0.0 {
                return Err(StimError::Config(format!("consonant {}: invalid prototype", c.id)));
            }
        }
        Ok(())
    }

    pub fn vowel(&self, idx: usize) -> &VowelPrototype {
        &self.vowels[idx]
    }

    pub fn consonant(&self, idx: usize) -> &ConsonantPrototype {
        &self.consonants[idx]
    }
}

/// One CV syllable to synthesize. Indices refer to the voice's consonant and vowel tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyllableSpec {
    pub consonant: usize,
    pub vowel: usize,
    pub duration_ms: f64,
}

impl SyllableSpec {
    pub fn new(consonant: usize, vowel: usize, duration_ms: f64) -> Result<Self, StimError> {
        let spec = Self { consonant, vowel, duration_ms };
        spec.check_duration()?;
        Ok(spec)
    }

    pub(crate) fn check_duration(&self) -> Result<(), StimError> {
        if !(MIN_SYLLABLE_MS..=MAX_SYLLABLE_MS).contains(&self.duration_ms) {
            return Err(StimError::InvalidSpec(format!(
                "syllable duration {} ms outside [{MIN_SYLLABLE_MS}, {MAX_SYLLABLE_MS}]",
                self.duration_ms
            )));
        }
        Ok(())
    }
}

/// Index into [`Inventory::syllables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SyllableId(pub usize);

#[derive(Debug, Clone, Deserialize)]
struct VoiceFile {
    f0_hz: f64,
    sample_rate_hz: u32,
    duration_seed: u64,
    min_duration_ms: f64,
    max_duration_ms: f64,
    vowels: Vec<VowelPrototype>,
    consonants: Vec<ConsonantPrototype>,
    #[serde(default)]
    words: Vec<WordDef>,
}

/// The full stimulus inventory: voice, the fixed CV syllable list and the gender-test words.
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    pub voice: ReferenceVoice,
    pub sample_rate_hz: u32,
    syllables: Vec<SyllableSpec>,
    words: Vec<(String, Vec<SyllableId>)>,
}

pub const INVENTORY_SIZE: usize = 60;

impl Inventory {
    /// The built-in voice: 242 Hz reference, 10 consonants x 6 vowels.
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_VOICE).expect("built-in voice definition is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, StimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, StimError> {
        let file: VoiceFile = toml::from_str(text).map_err(|e| StimError::Config(e.to_string()))?;
        let voice = ReferenceVoice { f0_hz: file.f0_hz, vowels: file.vowels, consonants: file.consonants };
        voice.validate(file.sample_rate_hz)?;
        let n_cv = voice.consonants.len() * voice.vowels.len();
        if n_cv != INVENTORY_SIZE {
            return Err(StimError::Config(format!(
                "inventory must contain exactly {INVENTORY_SIZE} CV syllables, got {n_cv}"
            )));
        }
        if !(MIN_SYLLABLE_MS <= file.min_duration_ms
            && file.min_duration_ms <= file.max_duration_ms
            && file.max_duration_ms <= MAX_SYLLABLE_MS)
        {
            return Err(StimError::Config("duration range must lie within [142, 200] ms".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(file.duration_seed);
        let mut syllables = Vec::with_capacity(n_cv);
        for c in 0..voice.consonants.len() {
            for v in 0..voice.vowels.len() {
                let u: f64 = rng.random();
                let d = file.min_duration_ms + u * (file.max_duration_ms - file.min_duration_ms);
                let d = (d * 10.0).round() / 10.0;
                syllables.push(SyllableSpec { consonant: c, vowel: v, duration_ms: d });
            }
        }

        let mut inv = Self { voice, sample_rate_hz: file.sample_rate_hz, syllables, words: Vec::new() };
        for w in file.words {
            let ids = w
                .syllables
                .iter()
                .map(|[c, v]| inv.find(c, v))
                .collect::<Result<Vec<_>, _>>()?;
            inv.words.push((w.id, ids));
        }
        Ok(inv)
    }

    pub fn syllables(&self) -> &[SyllableSpec] {
        &self.syllables
    }

    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn spec(&self, id: SyllableId) -> SyllableSpec {
        self.syllables[id.0]
    }

    pub fn label(&self, id: SyllableId) -> String {
        let s = self.spec(id);
        format!("{}{}", self.voice.consonants[s.consonant].id, self.voice.vowels[s.vowel].id)
    }

    pub fn find(&self, consonant: &str, vowel: &str) -> Result<SyllableId, StimError> {
        let c = self.voice.consonants.iter().position(|p| p.id == consonant);
        let v = self.voice.vowels.iter().position(|p| p.id == vowel);
        match (c, v) {
            (Some(c), Some(v)) => Ok(SyllableId(c * self.voice.vowels.len() + v)),
            _ => Err(StimError::InvalidSpec(format!("unknown syllable {consonant}{vowel}"))),
        }
    }

    pub fn word(&self, id: &str) -> Option<&[SyllableId]> {
        self.words.iter().find(|(w, _)| w == id).map(|(_, s)| s.as_slice())
    }

    pub fn word_ids(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|(w, _)| w.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn builtin_inventory_has_sixty_distinct_syllables() {
        let inv = Inventory::builtin();
        assert_eq!(inv.len(), 60);
        let labels: HashSet<_> = (0..inv.len()).map(|i| inv.label(SyllableId(i))).collect();
        assert_eq!(labels.len(), 60);
        for s in inv.syllables() {
            assert!((142.0..=200.0).contains(&s.duration_ms), "{}", s.duration_ms);
        }
        assert!((inv.voice.f0_hz - 242.0).abs() < 1e-12);
    }

    #[test]
    fn words_resolve() {
        let inv = Inventory::builtin();
        for w in ["bike", "pool", "watch", "hat"] {
            assert_eq!(inv.word(w).unwrap().len(), 2);
        }
        assert!(inv.word("car").is_none());
    }

    #[test]
    fn rejects_non_increasing_formants() {
        let bad = DEFAULT_VOICE.replacen("[437.0, 2761.0", "[2761.0, 437.0", 1);
        assert!(matches!(Inventory::from_toml_str(&bad), Err(StimError::Config(_))));
    }

    #[test]
    fn rejects_wrong_inventory_size() {
        let idx = DEFAULT_VOICE.find("[[consonants]]\nid = \"n\"").unwrap();
        let end = DEFAULT_VOICE[idx..].find("# Gender").unwrap() + idx;
        let mut bad = DEFAULT_VOICE.to_string();
        bad.replace_range(idx..end, "");
        assert!(Inventory::from_toml_str(&bad).is_err());
    }

    #[test]
    fn syllable_duration_bounds() {
        assert!(SyllableSpec::new(0, 0, 141.9).is_err());
        assert!(SyllableSpec::new(0, 0, 200.1).is_err());
        assert!(SyllableSpec::new(0, 0, 142.0).is_ok());
    }
}
