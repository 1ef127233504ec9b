//! Source-filter synthesis of CV syllables.
//!
//! The vowel branch is a Rosenberg glottal-flow-derivative pulse train fed
//! through four cascaded two-pole formant resonators. The consonant branch is
//! seeded noise (or voicing, for nasals) shaped by two prototype resonances.
//! Every resonance, vowel or consonant, is scaled by the same vocal-tract
//! factor, so a VTL change is a uniform shift of the whole envelope on a
//! log-frequency axis. Amplitude envelopes act on the excitation, never on the
//! filtered output: during the closed phase of each glottal cycle the vowel
//! branch is a free decay of the all-pole cascade.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::voice::{ConsonantKind, ReferenceVoice, SyllableSpec};
use super::{semitones_to_ratio, AudioBuffer, StimError, VoiceTransform};

/// Fraction of the glottal cycle taken by the opening phase.
pub const GLOTTAL_OPENING: f64 = 0.40;
/// Fraction of the glottal cycle taken by the closing phase.
pub const GLOTTAL_CLOSING: f64 = 0.16;
/// Open quotient; the excitation is exactly zero for phases in `[GLOTTAL_OPEN_QUOTIENT, 1)`.
pub const GLOTTAL_OPEN_QUOTIENT: f64 = GLOTTAL_OPENING + GLOTTAL_CLOSING;

const VOICING_RAMP_MS: f64 = 12.0;
const OFFSET_RAMP_MS: f64 = 20.0;
const NASAL_MURMUR_GAIN: f64 = 0.6;

/// Klatt-style two-pole resonator with unity gain at DC.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    pub(crate) fn new(freq_hz: f64, bandwidth_hz: f64, sample_rate_hz: f64) -> Self {
        let t = 1.0 / sample_rate_hz;
        let c = -(-2.0 * std::f64::consts::PI * bandwidth_hz * t).exp();
        let b = 2.0 * (-std::f64::consts::PI * bandwidth_hz * t).exp() * (2.0 * std::f64::consts::PI * freq_hz * t).cos();
        let a = 1.0 - b - c;
        Self { a, b, c, y1: 0.0, y2: 0.0 }
    }

    #[inline]
    pub(crate) fn tick(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Derivative of the Rosenberg glottal flow with respect to cycle phase.
#[inline]
pub(crate) fn glottal_derivative(phase: f64) -> f64 {
    use std::f64::consts::PI;
    if phase < GLOTTAL_OPENING {
        0.5 * (PI / GLOTTAL_OPENING) * (PI * phase / GLOTTAL_OPENING).sin()
    } else if phase < GLOTTAL_OPEN_QUOTIENT {
        -(PI / (2.0 * GLOTTAL_CLOSING)) * (PI * (phase - GLOTTAL_OPENING) / (2.0 * GLOTTAL_CLOSING)).sin()
    } else {
        0.0
    }
}

/// Glottal cycle phase in `[0, 1)` at sample `n`.
#[inline]
pub fn glottal_phase(n: usize, f0_hz: f64, sample_rate_hz: f64) -> f64 {
    let cycles = n as f64 * f0_hz / sample_rate_hz;
    cycles - cycles.floor()
}

fn raised_cosine(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    0.5 - 0.5 * (std::f64::consts::PI * x).cos()
}

/// Sample-accurate layout of one synthesized syllable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyllableLayout {
    pub n_samples: usize,
    /// First sample of the vowel proper.
    pub vowel_onset: usize,
    /// First sample at which the vowel branch receives voicing.
    pub voicing_onset: usize,
}

pub fn layout(spec: &SyllableSpec, voice: &ReferenceVoice, sample_rate_hz: u32) -> SyllableLayout {
    let sr = sample_rate_hz as f64;
    let n_samples = (spec.duration_ms * sr / 1000.0).round() as usize;
    let cons = voice.consonant(spec.consonant);
    let cons_len = ((cons.duration_ms * sr / 1000.0).round() as usize).min(n_samples / 2);
    let voicing_onset = match cons.kind {
        ConsonantKind::VoicelessStop | ConsonantKind::Fricative => cons_len,
        // voiced stops: voicing starts right after the release burst
        ConsonantKind::VoicedStop => cons_len / 2,
        ConsonantKind::Nasal => cons_len,
    };
    SyllableLayout { n_samples, vowel_onset: cons_len, voicing_onset }
}

fn noise_seed(spec: &SyllableSpec) -> u64 {
    0x5EED_0000_0000_0000 ^ ((spec.consonant as u64) << 16) ^ spec.vowel as u64
}

pub(crate) fn synthesize(
    spec: &SyllableSpec,
    voice: &ReferenceVoice,
    transform: VoiceTransform,
    sample_rate_hz: u32,
) -> Result<AudioBuffer, StimError> {
    spec.check_duration()?;
    if spec.consonant >= voice.consonants.len() || spec.vowel >= voice.vowels.len() {
        return Err(StimError::InvalidSpec(format!(
            "syllable ({}, {}) outside the voice tables",
            spec.consonant, spec.vowel
        )));
    }
    if !transform.is_finite() {
        return Err(StimError::Domain("voice transform must be finite".into()));
    }
    let sr = sample_rate_hz as f64;
    let nyquist = sr / 2.0;

    // F0 first, then VTL; the two are independent parameters here.
    let f0 = voice.f0_hz * semitones_to_ratio(transform.d_f0_st);
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(StimError::Domain(format!("transformed F0 {f0} Hz is not positive")));
    }
    let scale = semitones_to_ratio(-transform.d_vtl_st);

    let vowel = voice.vowel(spec.vowel);
    let cons = voice.consonant(spec.consonant);
    let scaled = |f: f64| -> Result<f64, StimError> {
        let s = f * scale;
        if s >= nyquist {
            Err(StimError::Synthesis { formant_hz: s, nyquist_hz: nyquist })
        } else {
            Ok(s)
        }
    };

    let mut vowel_filters = Vec::with_capacity(4);
    for (&f, &bw) in vowel.formants_hz.iter().zip(&vowel.bandwidths_hz) {
        vowel_filters.push(Resonator::new(scaled(f)?, bw * scale, sr));
    }
    let mut cons_filters = Vec::with_capacity(2);
    for (&f, &bw) in cons.resonances_hz.iter().zip(&cons.bandwidths_hz) {
        cons_filters.push(Resonator::new(scaled(f)?, bw * scale, sr));
    }

    let lay = layout(spec, voice, sample_rate_hz);
    let n = lay.n_samples;
    let ramp = (VOICING_RAMP_MS * sr / 1000.0).max(1.0);
    let offset = (OFFSET_RAMP_MS * sr / 1000.0).max(1.0);
    let cons_len = lay.vowel_onset as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(spec));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64;
        let tail = raised_cosine((n as f64 - 1.0 - t) / offset);

        let voicing = if i >= lay.voicing_onset {
            raised_cosine((t - lay.voicing_onset as f64) / ramp) * tail
        } else {
            0.0
        };
        let glottal = glottal_derivative(glottal_phase(i, f0, sr));
        let mut v = glottal * voicing;
        for r in vowel_filters.iter_mut() {
            v = r.tick(v);
        }

        let cons_env = consonant_envelope(cons.kind, t, cons_len, ramp);
        let excitation = match cons.kind {
            ConsonantKind::Nasal => NASAL_MURMUR_GAIN * glottal,
            _ => rng.random::<f64>() * 2.0 - 1.0,
        };
        let mut c = excitation * cons_env * cons.gain;
        for r in cons_filters.iter_mut() {
            c = r.tick(c);
        }
        out.push(v + c);
    }

    let mut buf = AudioBuffer::new(out, sample_rate_hz)?;
    let peak = buf.peak();
    if peak > 0.0 {
        // fixed headroom; loudness is set later by RMS equalization
        let g = 0.5 / peak;
        buf.samples.iter_mut().for_each(|s| *s *= g);
    }
    Ok(buf)
}

fn consonant_envelope(kind: ConsonantKind, t: f64, cons_len: f64, ramp: f64) -> f64 {
    if t >= cons_len {
        return 0.0;
    }
    match kind {
        ConsonantKind::VoicelessStop | ConsonantKind::VoicedStop => {
            // sharp burst decaying into aspiration
            let burst = (-t / (0.1 * cons_len.max(1.0))).exp();
            let aspiration = 0.35 * raised_cosine((cons_len - t) / (0.3 * cons_len.max(1.0)));
            burst.max(aspiration)
        }
        ConsonantKind::Fricative => {
            raised_cosine(t / (0.3 * cons_len.max(1.0))) * raised_cosine((cons_len - t) / (0.3 * cons_len.max(1.0)))
        }
        ConsonantKind::Nasal => raised_cosine(t / ramp) * raised_cosine((cons_len - t) / ramp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glottal_derivative_is_zero_in_closed_phase() {
        for k in 0..100 {
            let phase = GLOTTAL_OPEN_QUOTIENT + (1.0 - GLOTTAL_OPEN_QUOTIENT) * k as f64 / 100.0;
            assert_eq!(glottal_derivative(phase), 0.0);
        }
        // flow returns to zero: the derivative integrates to ~0 over a cycle
        let n = 100_000;
        let area: f64 = (0..n).map(|k| glottal_derivative(k as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!(area.abs() < 1e-4, "{area}");
    }

    #[test]
    fn resonator_has_unity_dc_gain() {
        let mut r = Resonator::new(800.0, 90.0, 44_100.0);
        let mut y = 0.0;
        for _ in 0..20_000 {
            y = r.tick(1.0);
        }
        assert!((y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phase_wraps_into_unit_interval() {
        for n in 0..10_000 {
            let p = glottal_phase(n, 242.0, 44_100.0);
            assert!((0.0..1.0).contains(&p));
        }
    }
}
