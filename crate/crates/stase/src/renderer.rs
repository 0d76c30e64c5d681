//! Deterministic plan rendering to stereo.
//!
//! Each source renders independently through the signal chain its
//! localization mode dictates, then everything sums with the shared reverb
//! bus. All paths are linear, so a mix equals the sample-wise sum of its
//! solo renders (with normalization off), and every operation is fixed-order
//! floating point: the same plan and stems produce byte-identical output on
//! every run.
//!
//! Per-mode chains, all scaled by the inverse-distance gain:
//!
//! - panning: constant-power gain pair, no delay or filtering
//! - itd_ild: interaural delay (Woodworth) on the far ear plus mirrored
//!   high-shelf gains, computed from |azimuth| and assigned to channels by
//!   sign, so mirrored sources are exact channel swaps; both ears carry an
//!   extra sqrt(2)/2 so center level matches the panning chain
//! - hrtf: convolution with the nearest bank pair, nothing else
//!
//! The reverb bus receives each source's mono signal times its send level
//! (before distance attenuation), is processed once by the room impulse
//! response or the algorithmic reverberator, and returns equally to both
//! channels times the wet gain.

use serde::Serialize;

use crate::audio_io::{HrirBank, RirBank, Stem};
use crate::config::{DryWetLaw, EngineConfig};
use crate::dsp_core::{self, AudioBuffer, DspError, Ear};
use crate::scene_model::{LocalizationMode, ReverbKind, SpatialPlan};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("plan is invalid: {0}")]
    InvalidPlan(String),
    #[error("stem {0:?} is not available")]
    MissingStem(String),
    #[error("plan needs an HRIR bank: source {0:?} uses hrtf mode")]
    HrirBankRequired(String),
    #[error("plan needs a RIR bank for reverb environment {0:?}")]
    RirBankRequired(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Per-source record of what the renderer actually did.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SourceTrace {
    pub source_id: String,
    pub mode: LocalizationMode,
    /// Constant-power gain pair, panning mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pan_gains: Option<(f64, f64)>,
    /// Far-ear interaural delay in samples, itd_ild mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_samples: Option<f64>,
    /// Ipsilateral shelf gain in dB (the contralateral ear gets its
    /// negative), itd_ild mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shelf_db: Option<f64>,
    /// Index of the HRIR pair used, hrtf mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hrir_index: Option<usize>,
    pub distance_gain: f64,
    pub reverb_send: f64,
}

/// Full render trace: per-source stages plus mix-level numbers.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RenderTrace {
    pub sources: Vec<SourceTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rir_id: Option<String>,
    pub peak_before_normalize: f64,
    pub peak_after_normalize: f64,
    pub normalize_scale: f64,
}

fn add_scaled(dst: &mut Vec<f64>, src: &[f64], scale: f64) {
    if dst.len() < src.len() {
        dst.resize(src.len(), 0.0);
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}

/// Renders a validated plan against named stems.
///
/// Banks are optional: the HRIR bank is required only when a source uses
/// hrtf mode, the RIR bank only when the reverb kind is RIR convolution and
/// the wet gain is nonzero.
pub fn render(
    plan: &SpatialPlan,
    stems: &[Stem],
    hrirs: Option<&HrirBank>,
    rirs: Option<&RirBank>,
    cfg: &EngineConfig,
) -> Result<(AudioBuffer, RenderTrace), RenderError> {
    let rir_ids: Vec<&str> = match rirs {
        Some(bank) => bank.entries().iter().map(|e| e.rir_id.as_str()).collect(),
        // Without a bank the reference check is deferred to the bank
        // requirement below.
        None => match &plan.reverb.kind {
            ReverbKind::RirConvolution { rir_id } => vec![rir_id.as_str()],
            ReverbKind::Algorithmic { .. } => Vec::new(),
        },
    };
    let report = crate::scene_model::validate_plan(
        plan,
        stems.iter().map(|s| s.stem_id.as_str()),
        rir_ids,
    );
    if !report.is_empty() {
        let summary = report
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.code, v.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(RenderError::InvalidPlan(summary));
    }

    let rate = plan.output.sample_rate_hz;
    let stem_by_id: std::collections::BTreeMap<&str, &Stem> =
        stems.iter().map(|s| (s.stem_id.as_str(), s)).collect();
    for source in &plan.sources {
        let stem = stem_by_id
            .get(source.source_id.as_str())
            .ok_or_else(|| RenderError::MissingStem(source.source_id.clone()))?;
        if stem.buffer.sample_rate_hz() != rate {
            return Err(DspError::SampleRateMismatch(rate, stem.buffer.sample_rate_hz()).into());
        }
    }

    let wet_gain = plan.reverb.wet_gain;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut bus = Vec::new();
    let mut traces = Vec::with_capacity(plan.sources.len());

    for source in &plan.sources {
        let stem = stem_by_id[source.source_id.as_str()];
        let x = &stem.buffer;
        let dist = dsp_core::distance_gain(source.distance_m)?;
        let mut trace = SourceTrace {
            source_id: source.source_id.clone(),
            mode: source.mode,
            pan_gains: None,
            delay_samples: None,
            shelf_db: None,
            hrir_index: None,
            distance_gain: dist,
            reverb_send: source.reverb_send,
        };

        match source.mode {
            LocalizationMode::Panning => {
                let (gl, gr) = dsp_core::pan_gains(source.azimuth_deg);
                add_scaled(&mut left, x.channel(0), gl * dist);
                add_scaled(&mut right, x.channel(0), gr * dist);
                trace.pan_gains = Some((gl, gr));
            }
            LocalizationMode::ItdIld => {
                // Everything derives from the unsigned lateral angle; the
                // azimuth sign only picks which channel is which, so
                // mirrored sources are bit-exact swaps.
                let lateral = source.azimuth_deg.clamp(-90.0, 90.0).abs();
                let head = cfg.head_model();
                let tau = dsp_core::woodworth_tau(lateral, &head);
                let shelve = |signal: &AudioBuffer, ear: Ear| {
                    dsp_core::ild_filter_with(
                        signal,
                        lateral,
                        ear,
                        cfg.ild_max_db,
                        cfg.shelf_fc_hz,
                        cfg.shelf_slope,
                    )
                };
                let near = shelve(x, Ear::Ipsilateral)?;
                let far_in = if cfg.debug_disable_itd_delay {
                    x.clone()
                } else {
                    dsp_core::fractional_delay(x, tau)?
                };
                let far = shelve(&far_in, Ear::Contralateral)?;
                let ear_gain = std::f64::consts::FRAC_1_SQRT_2 * dist;
                let (l, r) = if source.azimuth_deg >= 0.0 {
                    (&far, &near)
                } else {
                    (&near, &far)
                };
                add_scaled(&mut left, l.channel(0), ear_gain);
                add_scaled(&mut right, r.channel(0), ear_gain);
                trace.delay_samples = Some(tau * rate as f64);
                trace.shelf_db =
                    Some(dsp_core::ild_shelf_gain_db(lateral, Ear::Ipsilateral, cfg.ild_max_db));
            }
            LocalizationMode::Hrtf => {
                let bank = hrirs
                    .ok_or_else(|| RenderError::HrirBankRequired(source.source_id.clone()))?;
                if bank.sample_rate_hz() != rate {
                    return Err(DspError::SampleRateMismatch(rate, bank.sample_rate_hz()).into());
                }
                let (index, entry) =
                    bank.nearest(source.azimuth_deg, source.elevation_deg);
                let ir_l = AudioBuffer::mono(entry.left.clone(), rate)?;
                let ir_r = AudioBuffer::mono(entry.right.clone(), rate)?;
                let out_l = dsp_core::convolve(x, &ir_l)?;
                let out_r = dsp_core::convolve(x, &ir_r)?;
                add_scaled(&mut left, out_l.channel(0), dist);
                add_scaled(&mut right, out_r.channel(0), dist);
                trace.hrir_index = Some(index);
            }
        }

        if wet_gain > 0.0 && source.reverb_send > 0.0 {
            let send = match cfg.dry_wet_law {
                DryWetLaw::Independent => source.reverb_send,
                DryWetLaw::DistanceWeighted => {
                    source.reverb_send * source.distance_m / (source.distance_m + 1.0)
                }
            };
            add_scaled(&mut bus, x.channel(0), send);
        }
        traces.push(trace);
    }

    let mut rir_id_used = None;
    if wet_gain > 0.0 && !bus.is_empty() {
        let bus_buffer = AudioBuffer::mono(bus, rate)?;
        let wet = match &plan.reverb.kind {
            ReverbKind::RirConvolution { rir_id } => {
                let bank = rirs.ok_or_else(|| RenderError::RirBankRequired(rir_id.clone()))?;
                if bank.sample_rate_hz() != rate {
                    return Err(DspError::SampleRateMismatch(rate, bank.sample_rate_hz()).into());
                }
                let entry = bank.get(rir_id).expect("validated rir id");
                rir_id_used = Some(rir_id.clone());
                let ir = AudioBuffer::mono(entry.samples.clone(), rate)?;
                dsp_core::convolve(&bus_buffer, &ir)?
            }
            ReverbKind::Algorithmic { rt60_s, predelay_ms } => dsp_core::schroeder_reverb_with(
                &bus_buffer,
                *rt60_s,
                *predelay_ms,
                rate,
                &cfg.comb_delays_ms,
                &cfg.allpass_delays_ms,
                cfg.allpass_coeff,
            )?,
        };
        add_scaled(&mut left, wet.channel(0), wet_gain);
        add_scaled(&mut right, wet.channel(0), wet_gain);
    }

    let len = left.len().max(right.len());
    left.resize(len, 0.0);
    right.resize(len, 0.0);

    let peak_before = left
        .iter()
        .chain(&right)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let target = 10f64.powf(cfg.normalize_peak_dbfs / 20.0);
    // Normalization only ever attenuates: quiet mixes stay untouched.
    let scale = if cfg.normalize && peak_before > target {
        target / peak_before
    } else {
        1.0
    };
    if scale != 1.0 {
        for v in left.iter_mut().chain(right.iter_mut()) {
            *v *= scale;
        }
    }
    let peak_after = peak_before * scale;

    let out = AudioBuffer::stereo(left, right, rate)?;
    let trace = RenderTrace {
        sources: traces,
        rir_id: rir_id_used,
        peak_before_normalize: peak_before,
        peak_after_normalize: peak_after,
        normalize_scale: scale,
    };
    Ok((out, trace))
}
