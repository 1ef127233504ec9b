//! 16-bit PCM mono WAV encoding.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use super::{AudioBuffer, StimError};

fn spec(sample_rate_hz: u32) -> hound::WavSpec {
    hound::WavSpec { channels: 1, sample_rate: sample_rate_hz, bits_per_sample: 16, sample_format: hound::SampleFormat::Int }
}

#[inline]
fn quantize(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
}

pub fn write_to<W: Write + Seek>(buf: &AudioBuffer, out: W) -> Result<(), StimError> {
    let mut w = hound::WavWriter::new(out, spec(buf.sample_rate_hz))?;
    for &s in &buf.samples {
        w.write_sample(quantize(s))?;
    }
    w.finalize()?;
    Ok(())
}

pub fn to_bytes(buf: &AudioBuffer) -> Result<Vec<u8>, StimError> {
    let mut cur = Cursor::new(Vec::new());
    write_to(buf, &mut cur)?;
    Ok(cur.into_inner())
}

pub fn write_file(buf: &AudioBuffer, path: &Path) -> Result<(), StimError> {
    let bytes = to_bytes(buf)?;
    let tmp = path.with_extension("wav.tmp");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_from<R: Read>(input: R) -> Result<AudioBuffer, StimError> {
    let r = hound::WavReader::new(input)?;
    let s = r.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(StimError::InvalidSpec("expected 16-bit PCM mono".into()));
    }
    let samples = r
        .into_samples::<i16>()
        .map(|v| v.map(|v| v as f64 / i16::MAX as f64))
        .collect::<Result<Vec<_>, _>>()?;
    AudioBuffer::new(samples, s.sample_rate)
}

pub fn read_file(path: &Path) -> Result<AudioBuffer, StimError> {
    read_from(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_pcm16_mono_le() {
        let buf = AudioBuffer::new(vec![0.0, 0.5, -0.5, 1.0], 44_100).unwrap();
        let bytes = to_bytes(&buf).unwrap();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        assert_eq!(u16::from_le_bytes([bytes[20], bytes[21]]), 1); // PCM
        assert_eq!(u16::from_le_bytes([bytes[22], bytes[23]]), 1); // mono
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 44_100);
        assert_eq!(u16::from_le_bytes([bytes[34], bytes[35]]), 16);
        assert_eq!(bytes.len(), 44 + 2 * 4);
        assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), 16384);
    }

    #[test]
    fn round_trip_within_quantization() {
        let buf = AudioBuffer::new((0..500).map(|i| (i as f64 * 0.01).sin() * 0.8).collect(), 22_050).unwrap();
        let back = read_from(Cursor::new(to_bytes(&buf).unwrap())).unwrap();
        assert_eq!(back.sample_rate_hz, 22_050);
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32767.0);
        }
    }
}
