//! `synth`: one RMS-equalized syllable sequence as a WAV file.

use std::path::Path;

use anyhow::{anyhow, Result};
use voicecue_core::stimgen::{
    rms_equalize, synth_sequence, wav, Inventory, SyllableId, SyllableSpec, VoiceTransform, DEFAULT_TARGET_RMS,
};

/// Syllables by label (`ba`) or index, or a gender-test word id.
pub fn resolve(inventory: &Inventory, syllables: &[String], word: Option<&str>) -> Result<Vec<SyllableSpec>> {
    let ids: Vec<SyllableId> = match word {
        Some(w) => inventory
            .word(w)
            .ok_or_else(|| anyhow!("unknown word {w:?}; known: {}", inventory.word_ids().collect::<Vec<_>>().join(", ")))?
            .to_vec(),
        None => syllables
            .iter()
            .map(|s| match s.parse::<usize>() {
                Ok(i) if i < inventory.len() => Ok(SyllableId(i)),
                Ok(i) => Err(anyhow!("syllable index {i} out of range")),
                Err(_) => (0..inventory.len())
                    .map(SyllableId)
                    .find(|id| inventory.label(*id) == *s)
                    .ok_or_else(|| anyhow!("unknown syllable {s:?}")),
            })
            .collect::<Result<_>>()?,
    };
    if ids.is_empty() {
        return Err(anyhow!("no syllables given"));
    }
    Ok(ids.into_iter().map(|id| inventory.spec(id)).collect())
}

pub fn synth_to_file(
    syllables: &[String],
    word: Option<&str>,
    d_f0_st: f64,
    d_vtl_st: f64,
    target_rms: Option<f64>,
    out: &Path,
) -> Result<f64> {
    let inventory = Inventory::builtin();
    let specs = resolve(&inventory, syllables, word)?;
    let raw = synth_sequence(&specs, &inventory.voice, VoiceTransform::new(d_f0_st, d_vtl_st), inventory.sample_rate_hz)?;
    let eq = rms_equalize(&raw, target_rms.unwrap_or(DEFAULT_TARGET_RMS))?;
    wav::write_file(&eq.buffer, out)?;
    Ok(eq.buffer.duration_s())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllables_resolve_by_label_index_or_word() {
        let inv = Inventory::builtin();
        let label = inv.label(SyllableId(7));
        let by_label = resolve(&inv, &[label], None).unwrap();
        let by_index = resolve(&inv, &["7".into()], None).unwrap();
        assert_eq!(by_label, by_index);
        assert_eq!(resolve(&inv, &[], Some("bike")).unwrap().len(), inv.word("bike").unwrap().len());
        assert!(resolve(&inv, &["zz".into()], None).is_err());
        assert!(resolve(&inv, &["600".into()], None).is_err());
        assert!(resolve(&inv, &[], None).is_err());
    }
}
