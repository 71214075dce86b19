use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{quantize, AudioClip};
use crate::error::{Error, Result};

fn format_err(e: hound::Error) -> Error {
    Error::Format(e.to_string())
}

fn write_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

/// Reads a PCM WAV file, downmixing to mono and rescaling to 16-bit.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = File::open(path.as_ref())?;
    read_wav(BufReader::new(file))
}

/// Like [`load_wav`] but over any seekable reader.
pub fn read_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let mut reader = WavReader::new(reader).map_err(format_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    let frames: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => {
            let bits = spec.bits_per_sample as i32;
            if !(1..=32).contains(&bits) {
                return Err(Error::Format(format!("unsupported bit depth {bits}")));
            }
            let scale = 2f64.powi(16 - bits);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale).map_err(format_err))
                .collect::<Result<_>>()?
        }
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64 * super::FULL_SCALE).map_err(format_err))
            .collect::<Result<_>>()?,
    };
    if !frames.len().is_multiple_of(channels) {
        return Err(Error::Format("truncated sample data".into()));
    }
    let mono: Vec<i16> = frames
        .chunks_exact(channels)
        .map(|frame| quantize(frame.iter().sum::<f64>() / channels as f64))
        .collect();
    AudioClip::new(mono, spec.sample_rate)
}

/// Writes 16-bit little-endian mono PCM.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_wav(clip, BufWriter::new(file))
}

pub fn write_wav<W: Write + Seek>(clip: &AudioClip, writer: W) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::new(writer, spec).map_err(write_err)?;
    {
        let mut i16_writer = w.get_i16_writer(clip.len() as u32);
        for &s in clip.samples() {
            i16_writer.write_sample(s);
        }
        i16_writer.flush().map_err(write_err)?;
    }
    w.finalize().map_err(write_err)?;
    Ok(())
}
