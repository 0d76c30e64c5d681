//! WAV input/output and impulse-response bank loading.
//!
//! The WAV codec is hand-rolled: the engine needs exact control over sample
//! scaling, clamping, and error reporting, and the subset involved (RIFF with
//! PCM16, PCM24, and float32 chunks) is small. Integer samples scale by
//! 2^(bits-1), so full-scale negative is exactly -1.0; writes round half away
//! from zero and clamp to the representable code range. Float32 samples pass
//! through bit-exactly.
//!
//! HRIR and RIR banks load from JSON manifests whose entry paths resolve
//! relative to the manifest file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dsp_core::{AudioBuffer, DspError};

#[derive(Debug, thiserror::Error)]
pub enum AudioIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid WAV file: {message}")]
    BadHeader { path: String, message: String },
    #[error("{path} uses an unsupported encoding: {message}")]
    Unsupported { path: String, message: String },
    #[error("manifest {path} is invalid: {message}")]
    Manifest { path: String, message: String },
    #[error("manifest {path} entry {index}: {message}")]
    ManifestEntry {
        path: String,
        index: usize,
        message: String,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

fn io_err(path: &Path, source: std::io::Error) -> AudioIoError {
    AudioIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn header_err(path: &Path, message: impl Into<String>) -> AudioIoError {
    AudioIoError::BadHeader {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn unsupported_err(path: &Path, message: impl Into<String>) -> AudioIoError {
    AudioIoError::Unsupported {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// On-disk sample encodings the writer can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

/// Reads a mono or stereo WAV file (PCM16, PCM24, or float32).
pub fn read_wav(path: &Path) -> Result<AudioBuffer, AudioIoError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(header_err(path, "missing RIFF/WAVE header"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut offset = 12usize;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap()) as usize;
        let body_start = offset + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| header_err(path, "chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(header_err(path, "fmt chunk too short"));
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let num_channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((audio_format, num_channels, sample_rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        offset = body_end + (size & 1);
    }

    let (audio_format, num_channels, sample_rate, bits) =
        fmt.ok_or_else(|| header_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| header_err(path, "missing data chunk"))?;
    if num_channels == 0 || num_channels > 2 {
        return Err(unsupported_err(
            path,
            format!("{num_channels} channels (only mono and stereo are supported)"),
        ));
    }

    let bytes_per_sample = match (audio_format, bits) {
        (1, 16) => 2,
        (1, 24) => 3,
        (3, 32) => 4,
        _ => {
            return Err(unsupported_err(
                path,
                format!("format {audio_format} at {bits} bits"),
            ))
        }
    };
    let frame_bytes = bytes_per_sample * num_channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(header_err(path, "data chunk is not a whole number of frames"));
    }
    let num_frames = data.len() / frame_bytes;

    let mut channels = vec![Vec::with_capacity(num_frames); num_channels as usize];
    for frame in 0..num_frames {
        for (ch, channel) in channels.iter_mut().enumerate() {
            let at = frame * frame_bytes + ch * bytes_per_sample;
            let value = match (audio_format, bits) {
                (1, 16) => {
                    i16::from_le_bytes(data[at..at + 2].try_into().unwrap()) as f64 / 32768.0
                }
                (1, 24) => {
                    let raw = [data[at], data[at + 1], data[at + 2], 0];
                    (i32::from_le_bytes(raw) << 8 >> 8) as f64 / 8_388_608.0
                }
                (3, 32) => f32::from_le_bytes(data[at..at + 4].try_into().unwrap()) as f64,
                _ => unreachable!(),
            };
            channel.push(value);
        }
    }

    let buffer = if channels.len() == 1 {
        AudioBuffer::mono(channels.pop().unwrap(), sample_rate)?
    } else {
        let right = channels.pop().unwrap();
        let left = channels.pop().unwrap();
        AudioBuffer::stereo(left, right, sample_rate)?
    };
    Ok(buffer)
}

fn encode_pcm(value: f64, scale: f64, max_code: i64) -> i64 {
    let code = (value * scale).round();
    let code = if code.is_nan() { 0.0 } else { code };
    (code as i64).clamp(-(max_code + 1), max_code)
}

/// Writes a WAV file in the requested sample format.
pub fn write_wav(
    path: &Path,
    buffer: &AudioBuffer,
    format: SampleFormat,
) -> Result<(), AudioIoError> {
    let num_channels = buffer.num_channels() as u16;
    let num_samples = buffer.num_samples();
    let (audio_format, bits): (u16, u16) = match format {
        SampleFormat::Pcm16 => (1, 16),
        SampleFormat::Pcm24 => (1, 24),
        SampleFormat::Float32 => (3, 32),
    };
    let bytes_per_sample = (bits / 8) as usize;
    let block_align = num_channels as usize * bytes_per_sample;
    let data_len = num_samples * block_align;

    let fmt_body_len: usize = if audio_format == 3 { 18 } else { 16 };
    let fact_len: usize = if audio_format == 3 { 8 + 4 } else { 0 };
    let riff_len = 4 + (8 + fmt_body_len) + fact_len + (8 + data_len);

    let mut out = Vec::with_capacity(8 + riff_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&(fmt_body_len as u32).to_le_bytes());
    out.extend_from_slice(&audio_format.to_le_bytes());
    out.extend_from_slice(&num_channels.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate_hz().to_le_bytes());
    let byte_rate = buffer.sample_rate_hz() as usize * block_align;
    out.extend_from_slice(&(byte_rate as u32).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if audio_format == 3 {
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(num_samples as u32).to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for frame in 0..num_samples {
        for ch in 0..buffer.num_channels() {
            let value = buffer.channel(ch)[frame];
            match format {
                SampleFormat::Pcm16 => {
                    let code = encode_pcm(value, 32768.0, 32767) as i16;
                    out.extend_from_slice(&code.to_le_bytes());
                }
                SampleFormat::Pcm24 => {
                    let code = encode_pcm(value, 8_388_608.0, 8_388_607) as i32;
                    out.extend_from_slice(&code.to_le_bytes()[0..3]);
                }
                SampleFormat::Float32 => {
                    out.extend_from_slice(&(value as f32).to_le_bytes());
                }
            }
        }
    }

    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// A named mono stem ready for placement.
#[derive(Debug, Clone)]
pub struct Stem {
    pub stem_id: String,
    pub buffer: AudioBuffer,
}

/// Loads every .wav in a directory as a mono stem, sorted by stem id.
///
/// The file name without extension becomes the stem id.
pub fn load_stems_dir(dir: &Path) -> Result<Vec<Stem>, AudioIoError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    let mut stems = Vec::new();
    for path in paths {
        let buffer = read_wav(&path)?;
        if !buffer.is_mono() {
            return Err(unsupported_err(&path, "stems must be mono"));
        }
        let stem_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        stems.push(Stem { stem_id, buffer });
    }
    if stems.is_empty() {
        return Err(unsupported_err(dir, "directory contains no .wav stems"));
    }
    Ok(stems)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HrirEntrySpec {
    azimuth_deg: f64,
    elevation_deg: f64,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    path_left: Option<String>,
    #[serde(default)]
    path_right: Option<String>,
}

/// One measured head-related impulse response pair.
#[derive(Debug, Clone)]
pub struct HrirEntry {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A bank of HRIR pairs at known directions, all at one sample rate.
#[derive(Debug, Clone)]
pub struct HrirBank {
    entries: Vec<HrirEntry>,
    sample_rate_hz: u32,
}

fn unit_vector(azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Great-circle angle in radians between two directions.
pub fn angular_distance(az_a: f64, el_a: f64, az_b: f64, el_b: f64) -> f64 {
    let a = unit_vector(az_a, el_a);
    let b = unit_vector(az_b, el_b);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

impl HrirBank {
    pub fn entries(&self) -> &[HrirEntry] {
        &self.entries
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Index and entry of the direction nearest to the request, by
    /// great-circle distance; ties keep the lowest index.
    pub fn nearest(&self, azimuth_deg: f64, elevation_deg: f64) -> (usize, &HrirEntry) {
        let mut best = 0usize;
        let mut best_distance = f64::INFINITY;
        for (i, entry) in self.entries.iter().enumerate() {
            let d = angular_distance(
                azimuth_deg,
                elevation_deg,
                entry.azimuth_deg,
                entry.elevation_deg,
            );
            if d < best_distance {
                best_distance = d;
                best = i;
            }
        }
        (best, &self.entries[best])
    }
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads an HRIR bank from a JSON manifest.
///
/// Each entry gives a direction plus either one stereo file (`path`) or a
/// mono file per ear (`path_left`/`path_right`). All referenced audio must
/// share one sample rate.
pub fn load_hrir_bank(manifest: &Path) -> Result<HrirBank, AudioIoError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| io_err(manifest, e))?;
    let specs: Vec<HrirEntrySpec> =
        serde_json::from_str(&text).map_err(|e| AudioIoError::Manifest {
            path: manifest.display().to_string(),
            message: e.to_string(),
        })?;
    if specs.is_empty() {
        return Err(AudioIoError::Manifest {
            path: manifest.display().to_string(),
            message: "manifest lists no HRIR entries".into(),
        });
    }
    let dir = manifest_dir(manifest);
    let entry_err = |index: usize, message: String| AudioIoError::ManifestEntry {
        path: manifest.display().to_string(),
        index,
        message,
    };

    let mut entries = Vec::with_capacity(specs.len());
    let mut sample_rate_hz = None;
    for (index, spec) in specs.into_iter().enumerate() {
        let (left, right, rate) = match (&spec.path, &spec.path_left, &spec.path_right) {
            (Some(path), None, None) => {
                let buffer = read_wav(&dir.join(path))?;
                if buffer.num_channels() != 2 {
                    return Err(entry_err(index, format!("{path} must be stereo")));
                }
                let rate = buffer.sample_rate_hz();
                let mut channels = buffer.into_channels();
                let right = channels.pop().unwrap();
                let left = channels.pop().unwrap();
                (left, right, rate)
            }
            (None, Some(left_path), Some(right_path)) => {
                let left = read_wav(&dir.join(left_path))?;
                let right = read_wav(&dir.join(right_path))?;
                if !left.is_mono() || !right.is_mono() {
                    return Err(entry_err(index, "per-ear HRIR files must be mono".into()));
                }
                if left.sample_rate_hz() != right.sample_rate_hz() {
                    return Err(entry_err(index, "per-ear sample rates differ".into()));
                }
                let rate = left.sample_rate_hz();
                (
                    left.into_channels().pop().unwrap(),
                    right.into_channels().pop().unwrap(),
                    rate,
                )
            }
            _ => {
                return Err(entry_err(
                    index,
                    "entry needs either path or both path_left and path_right".into(),
                ))
            }
        };
        match sample_rate_hz {
            None => sample_rate_hz = Some(rate),
            Some(expected) if expected != rate => {
                return Err(entry_err(
                    index,
                    format!("sample rate {rate} differs from bank rate {expected}"),
                ))
            }
            Some(_) => {}
        }
        if !(spec.azimuth_deg.is_finite() && spec.elevation_deg.is_finite()) {
            return Err(entry_err(index, "direction must be finite".into()));
        }
        entries.push(HrirEntry {
            azimuth_deg: spec.azimuth_deg,
            elevation_deg: spec.elevation_deg,
            left,
            right,
        });
    }
    Ok(HrirBank {
        entries,
        sample_rate_hz: sample_rate_hz.unwrap(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RirEntrySpec {
    rir_id: String,
    keywords: Vec<String>,
    path: String,
}

/// One named mono room impulse response.
#[derive(Debug, Clone)]
pub struct RirEntry {
    pub rir_id: String,
    pub keywords: Vec<String>,
    pub samples: Vec<f64>,
}

/// Room impulse responses in manifest order, all at one sample rate.
#[derive(Debug, Clone)]
pub struct RirBank {
    entries: Vec<RirEntry>,
    sample_rate_hz: u32,
}

impl RirBank {
    pub fn entries(&self) -> &[RirEntry] {
        &self.entries
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn get(&self, rir_id: &str) -> Option<&RirEntry> {
        self.entries.iter().find(|e| e.rir_id == rir_id)
    }
}

/// Loads a RIR bank from a JSON manifest of `{rir_id, keywords, path}`
/// entries; referenced files must be mono and share one sample rate.
pub fn load_rir_bank(manifest: &Path) -> Result<RirBank, AudioIoError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| io_err(manifest, e))?;
    let specs: Vec<RirEntrySpec> =
        serde_json::from_str(&text).map_err(|e| AudioIoError::Manifest {
            path: manifest.display().to_string(),
            message: e.to_string(),
        })?;
    if specs.is_empty() {
        return Err(AudioIoError::Manifest {
            path: manifest.display().to_string(),
            message: "manifest lists no RIR entries".into(),
        });
    }
    let dir = manifest_dir(manifest);
    let mut entries = Vec::with_capacity(specs.len());
    let mut sample_rate_hz = None;
    let mut seen = std::collections::BTreeSet::new();
    for (index, spec) in specs.into_iter().enumerate() {
        let entry_err = |message: String| AudioIoError::ManifestEntry {
            path: manifest.display().to_string(),
            index,
            message,
        };
        if !seen.insert(spec.rir_id.clone()) {
            return Err(entry_err(format!("duplicate rir_id {}", spec.rir_id)));
        }
        let buffer = read_wav(&dir.join(&spec.path))?;
        if !buffer.is_mono() {
            return Err(entry_err(format!("{} must be mono", spec.path)));
        }
        let rate = buffer.sample_rate_hz();
        match sample_rate_hz {
            None => sample_rate_hz = Some(rate),
            Some(expected) if expected != rate => {
                return Err(entry_err(format!(
                    "sample rate {rate} differs from bank rate {expected}"
                )))
            }
            Some(_) => {}
        }
        entries.push(RirEntry {
            rir_id: spec.rir_id,
            keywords: spec.keywords,
            samples: buffer.into_channels().pop().unwrap(),
        });
    }
    Ok(RirBank {
        entries,
        sample_rate_hz: sample_rate_hz.unwrap(),
    })
}
