//! Parametric CV-syllable stimuli with exact semitone-domain F0 and VTL manipulation.

mod cache;
mod estimate;
mod synth;
mod voice;
pub mod wav;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{content_hash, StimulusCache};
pub use estimate::{estimate_envelope_shift, estimate_f0};
pub use synth::{glottal_phase, layout, SyllableLayout, GLOTTAL_OPEN_QUOTIENT};
pub use voice::{
    ConsonantKind, ConsonantPrototype, Inventory, ReferenceVoice, SyllableId, SyllableSpec, VowelPrototype,
    INVENTORY_SIZE, MAX_SYLLABLE_MS, MIN_SYLLABLE_MS,
};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 44_100;
pub const DEFAULT_GAP_MS: f64 = 300.0;
pub const DEFAULT_TARGET_RMS: f64 = 0.1;

#[derive(Debug, Error)]
pub enum StimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("scaled formant {formant_hz:.1} Hz at or above Nyquist ({nyquist_hz:.1} Hz)")]
    Synthesis { formant_hz: f64, nyquist_hz: f64 },
    #[error("no estimate: {0}")]
    NoEstimate(&'static str),
    #[error("cannot equalize a silent buffer")]
    SilentInput,
    #[error("invalid stimulus specification: {0}")]
    InvalidSpec(String),
    #[error("voice configuration: {0}")]
    Config(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, StimError> {
        if samples.is_empty() {
            return Err(StimError::InvalidSpec("audio buffer must not be empty".into()));
        }
        if sample_rate_hz == 0 {
            return Err(StimError::InvalidSpec("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(StimError::InvalidSpec("non-finite sample".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Concatenate buffers that share a sample rate.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a AudioBuffer>) -> Result<Self, StimError> {
        let mut rate = None;
        let mut samples = Vec::new();
        for p in parts {
            match rate {
                None => rate = Some(p.sample_rate_hz),
                Some(r) if r != p.sample_rate_hz => {
                    return Err(StimError::InvalidSpec("cannot concatenate different sample rates".into()))
                }
                _ => {}
            }
            samples.extend_from_slice(&p.samples);
        }
        Self::new(samples, rate.unwrap_or(DEFAULT_SAMPLE_RATE_HZ))
    }
}

/// Signed (ΔF0, ΔVTL) in semitones relative to the reference voice.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VoiceTransform {
    pub d_f0_st: f64,
    pub d_vtl_st: f64,
}

impl VoiceTransform {
    pub const IDENTITY: Self = Self { d_f0_st: 0.0, d_vtl_st: 0.0 };

    pub fn new(d_f0_st: f64, d_vtl_st: f64) -> Self {
        Self { d_f0_st, d_vtl_st }
    }

    pub fn f0(d_f0_st: f64) -> Self {
        Self { d_f0_st, d_vtl_st: 0.0 }
    }

    pub fn vtl(d_vtl_st: f64) -> Self {
        Self { d_f0_st: 0.0, d_vtl_st }
    }

    pub fn is_finite(&self) -> bool {
        self.d_f0_st.is_finite() && self.d_vtl_st.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemitoneMode {
    RatioToSemitones,
    SemitonesToRatio,
}

pub fn semitone_convert(value: f64, mode: SemitoneMode) -> Result<f64, StimError> {
    match mode {
        SemitoneMode::RatioToSemitones => ratio_to_semitones(value),
        SemitoneMode::SemitonesToRatio => {
            if !value.is_finite() {
                return Err(StimError::Domain(format!("semitone value {value} is not finite")));
            }
            Ok(semitones_to_ratio(value))
        }
    }
}

pub fn ratio_to_semitones(ratio: f64) -> Result<f64, StimError> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(StimError::Domain(format!("ratio must be positive, got {ratio}")));
    }
    Ok(12.0 * ratio.log2())
}

#[inline]
pub fn semitones_to_ratio(st: f64) -> f64 {
    (st / 12.0).exp2()
}

/// Synthesize one syllable with the given voice transform.
///
/// Output F0 is `voice.f0_hz * 2^(d_f0/12)` and every resonance is scaled by
/// `2^(-d_vtl/12)`. The identity transform runs the same synthesis path.
pub fn synth_syllable(
    spec: &SyllableSpec,
    voice: &ReferenceVoice,
    transform: VoiceTransform,
    sample_rate_hz: u32,
) -> Result<AudioBuffer, StimError> {
    synth::synthesize(spec, voice, transform, sample_rate_hz)
}

/// Synthesize a syllable sequence (CVCV...) as one buffer.
pub fn synth_sequence(
    specs: &[SyllableSpec],
    voice: &ReferenceVoice,
    transform: VoiceTransform,
    sample_rate_hz: u32,
) -> Result<AudioBuffer, StimError> {
    let parts = specs
        .iter()
        .map(|s| synth_syllable(s, voice, transform, sample_rate_hz))
        .collect::<Result<Vec<_>, _>>()?;
    AudioBuffer::concat(&parts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub buffer: AudioBuffer,
    pub gain: f64,
    /// Set when the RMS target would have pushed the peak above 1 and the
    /// output was limited to peak 1 instead.
    pub peak_limited: bool,
}

pub fn rms_equalize(buf: &AudioBuffer, target_rms: f64) -> Result<Equalized, StimError> {
    if !(target_rms > 0.0 && target_rms.is_finite()) {
        return Err(StimError::Domain(format!("target RMS must be positive, got {target_rms}")));
    }
    let rms = buf.rms();
    if rms.is_nan() || rms <= 0.0 {
        return Err(StimError::SilentInput);
    }
    let mut gain = target_rms / rms;
    let peak = buf.peak() * gain;
    let peak_limited = peak > 1.0;
    if peak_limited {
        gain /= peak;
    }
    let samples = buf.samples.iter().map(|s| s * gain).collect();
    Ok(Equalized {
        buffer: AudioBuffer { samples, sample_rate_hz: buf.sample_rate_hz },
        gain,
        peak_limited,
    })
}

/// Three-interval trial: every interval is the same syllable sequence; only
/// the odd interval carries the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletStimulus {
    pub intervals: [AudioBuffer; 3],
    /// 1-based.
    pub odd_interval: u8,
    pub transform: VoiceTransform,
    pub inter_stimulus_gap_ms: f64,
    pub peak_limited: bool,
}

impl TripletStimulus {
    /// Onset of each interval in seconds from the start of interval 1.
    pub fn interval_onsets_s(&self) -> [f64; 3] {
        let gap = self.inter_stimulus_gap_ms / 1000.0;
        let d0 = self.intervals[0].duration_s();
        let d1 = self.intervals[1].duration_s();
        [0.0, d0 + gap, d0 + gap + d1 + gap]
    }

    pub fn total_duration_s(&self) -> f64 {
        self.interval_onsets_s()[2] + self.intervals[2].duration_s()
    }

    /// Whole trial as a single buffer with silent gaps.
    pub fn render(&self) -> AudioBuffer {
        let sr = self.intervals[0].sample_rate_hz;
        let gap = (self.inter_stimulus_gap_ms * sr as f64 / 1000.0).round() as usize;
        let mut samples = Vec::new();
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                samples.extend(std::iter::repeat_n(0.0, gap));
            }
            samples.extend_from_slice(&iv.samples);
        }
        AudioBuffer { samples, sample_rate_hz: sr }
    }
}

/// Exact length in seconds of `synth_sequence(specs, ..)` at `sample_rate_hz`.
pub fn sequence_duration_s(specs: &[SyllableSpec], sample_rate_hz: u32) -> f64 {
    let sr = sample_rate_hz as f64;
    let n: usize = specs.iter().map(|s| (s.duration_ms * sr / 1000.0).round() as usize).sum();
    n as f64 / sr
}

/// Exact length in seconds of a rendered three-interval trial.
pub fn triplet_duration_s(specs: &[SyllableSpec], gap_ms: f64, sample_rate_hz: u32) -> f64 {
    let sr = sample_rate_hz as f64;
    let gap = (gap_ms * sr / 1000.0).round() as usize;
    3.0 * sequence_duration_s(specs, sample_rate_hz) + (2 * gap) as f64 / sr
}

/// Nominal onset of interval 2 relative to interval 1 from syllable durations alone.
pub fn nominal_second_onset_s(specs: &[SyllableSpec], gap_ms: f64) -> f64 {
    specs.iter().map(|s| s.duration_ms).sum::<f64>() / 1000.0 + gap_ms / 1000.0
}

pub fn build_triplet(
    specs: &[SyllableSpec; 3],
    odd_interval: u8,
    voice: &ReferenceVoice,
    transform: VoiceTransform,
    gap_ms: f64,
    target_rms: f64,
    sample_rate_hz: u32,
) -> Result<TripletStimulus, StimError> {
    if !(1..=3).contains(&odd_interval) {
        return Err(StimError::InvalidSpec(format!("odd interval must be 1, 2 or 3, got {odd_interval}")));
    }
    if !(gap_ms >= 0.0 && gap_ms.is_finite()) {
        return Err(StimError::InvalidSpec(format!("gap must be non-negative, got {gap_ms}")));
    }
    let reference = rms_equalize(&synth_sequence(specs, voice, VoiceTransform::IDENTITY, sample_rate_hz)?, target_rms)?;
    let odd = rms_equalize(&synth_sequence(specs, voice, transform, sample_rate_hz)?, target_rms)?;
    let peak_limited = reference.peak_limited || odd.peak_limited;
    let intervals = std::array::from_fn(|i| {
        if i + 1 == odd_interval as usize {
            odd.buffer.clone()
        } else {
            reference.buffer.clone()
        }
    });
    Ok(TripletStimulus { intervals, odd_interval, transform, inter_stimulus_gap_ms: gap_ms, peak_limited })
}
