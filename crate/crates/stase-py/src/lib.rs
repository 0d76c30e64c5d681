//! Python bindings for the stase engine.
//!
//! Scalar helpers cross as plain floats; structured data (cues, plans,
//! rankings, reports) crosses as JSON strings so the Python side can use
//! `json.loads` without a schema dependency.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use stase::analysis::{self, ItdWeighting, DEFAULT_MAX_LAG_S};
use stase::audio_io::{
    load_hrir_bank, load_rir_bank, load_stems_dir, read_wav, write_wav, SampleFormat,
};
use stase::config::EngineConfig;
use stase::conductor::{build_plan as conduct, ConductorBackend, StemInput};
use stase::dsp_core::{self, HeadModel};
use stase::prompt_interpreter::{classify as route, parse_cues as parse, PromptRoute};
use stase::renderer;
use stase::scene_model::SpatialPlan;
use stase::template_bank::{load_bank, retrieve as rank};

/// Flattens an error and its source chain into one ValueError message.
fn py_err(e: impl std::error::Error) -> PyErr {
    let mut text = e.to_string();
    let mut cause = e.source();
    while let Some(c) = cause {
        let msg = c.to_string();
        if !text.contains(&msg) {
            text.push_str(": ");
            text.push_str(&msg);
        }
        cause = c.source();
    }
    PyValueError::new_err(text)
}

fn weighting_of(name: &str) -> PyResult<ItdWeighting> {
    match name {
        "plain" => Ok(ItdWeighting::Plain),
        "phat" => Ok(ItdWeighting::Phat),
        other => Err(PyValueError::new_err(format!(
            "weighting must be \"plain\" or \"phat\", got {other:?}"
        ))),
    }
}

fn config_of(path: Option<&str>) -> PyResult<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(Path::new(p)).map_err(py_err),
        None => Ok(EngineConfig::default()),
    }
}

/// Constant-power stereo gains for an azimuth in [-90, 90] degrees.
#[pyfunction]
fn pan_gains(azimuth_deg: f64) -> (f64, f64) {
    dsp_core::pan_gains(azimuth_deg)
}

/// (delay_left_s, delay_right_s) ear delays for the default head model.
#[pyfunction]
fn itd_seconds(azimuth_deg: f64) -> PyResult<(f64, f64)> {
    dsp_core::itd_seconds(azimuth_deg, &HeadModel::default()).map_err(py_err)
}

/// Spherical-head interaural delay in seconds at a lateral angle in degrees.
#[pyfunction]
fn woodworth_tau_s(lateral_deg: f64) -> f64 {
    dsp_core::woodworth_tau(lateral_deg, &HeadModel::default())
}

/// Lateral azimuth in degrees implied by an interaural delay in seconds.
#[pyfunction]
fn azimuth_from_itd(itd_s: f64) -> PyResult<f64> {
    analysis::azimuth_from_itd(itd_s, &HeadModel::default()).map_err(py_err)
}

/// Explicit spatial cues parsed from a prompt, as a JSON array.
#[pyfunction]
fn parse_cues(prompt: &str) -> PyResult<String> {
    serde_json::to_string(&parse(prompt)).map_err(py_err)
}

/// Routes a prompt: "description" when explicit cues parse, else "abstract".
#[pyfunction]
fn classify(prompt: &str) -> PyResult<String> {
    match route(prompt).map_err(py_err)? {
        PromptRoute::Description(_) => Ok("description".to_string()),
        PromptRoute::Abstract(_) => Ok("abstract".to_string()),
    }
}

/// Ranks a template bank against a query; JSON with hits and a confidence
/// flag.
#[pyfunction]
fn retrieve(templates_path: &str, query: &str) -> PyResult<String> {
    let bank = load_bank(Path::new(templates_path)).map_err(py_err)?;
    let ranking = rank(&bank, query);
    let hits: Vec<serde_json::Value> = ranking
        .hits
        .iter()
        .map(|h| serde_json::json!({ "template_id": h.template_id, "score": h.score }))
        .collect();
    serde_json::to_string(&serde_json::json!({
        "hits": hits,
        "low_confidence": ranking.low_confidence,
    }))
    .map_err(py_err)
}

/// Builds a spatial plan for named stems; returns (plan_json, warnings).
#[pyfunction]
#[pyo3(signature = (prompt, stem_ids, templates_path, sample_rate_hz = 48000))]
fn build_plan(
    prompt: &str,
    stem_ids: Vec<String>,
    templates_path: &str,
    sample_rate_hz: u32,
) -> PyResult<(String, Vec<String>)> {
    let bank = load_bank(Path::new(templates_path)).map_err(py_err)?;
    let stems: Vec<StemInput> = stem_ids.into_iter().map(StemInput::from_id).collect();
    let outcome = conduct(
        prompt,
        &stems,
        &ConductorBackend::RuleBased,
        &bank,
        sample_rate_hz,
    )
    .map_err(py_err)?;
    let json = serde_json::to_string_pretty(&outcome.plan).map_err(py_err)?;
    Ok((json, outcome.warnings))
}

/// Renders a plan (JSON text) against a stems directory into a float32 WAV.
///
/// Returns the peak sample of the written mix. A trace JSON is written when
/// trace_path is given.
#[pyfunction]
#[pyo3(signature = (
    plan_json,
    stems_dir,
    out_path,
    hrir_manifest = None,
    rir_manifest = None,
    config_path = None,
    trace_path = None,
))]
#[allow(clippy::too_many_arguments)]
fn render_to_file(
    plan_json: &str,
    stems_dir: &str,
    out_path: &str,
    hrir_manifest: Option<&str>,
    rir_manifest: Option<&str>,
    config_path: Option<&str>,
    trace_path: Option<&str>,
) -> PyResult<f64> {
    let plan: SpatialPlan = serde_json::from_str(plan_json).map_err(py_err)?;
    let stems = load_stems_dir(Path::new(stems_dir)).map_err(py_err)?;
    let hrirs = hrir_manifest
        .map(|p| load_hrir_bank(Path::new(p)))
        .transpose()
        .map_err(py_err)?;
    let rirs = rir_manifest
        .map(|p| load_rir_bank(Path::new(p)))
        .transpose()
        .map_err(py_err)?;
    let cfg = config_of(config_path)?;
    let (mix, trace) =
        renderer::render(&plan, &stems, hrirs.as_ref(), rirs.as_ref(), &cfg).map_err(py_err)?;
    write_wav(Path::new(out_path), &mix, SampleFormat::Float32).map_err(py_err)?;
    if let Some(tp) = trace_path {
        let mut text = serde_json::to_string_pretty(&trace).map_err(py_err)?;
        text.push('\n');
        std::fs::write(tp, text).map_err(py_err)?;
    }
    Ok(mix.peak())
}

/// Interaural time difference of a stereo WAV in seconds.
#[pyfunction]
#[pyo3(signature = (wav_path, weighting = "plain"))]
fn estimate_itd_wav(wav_path: &str, weighting: &str) -> PyResult<f64> {
    let buffer = read_wav(Path::new(wav_path)).map_err(py_err)?;
    analysis::estimate_itd_with(&buffer, DEFAULT_MAX_LAG_S, weighting_of(weighting)?)
        .map_err(py_err)
}

/// Interaural level difference of a stereo WAV in dB over a frequency band.
#[pyfunction]
#[pyo3(signature = (wav_path, low_hz = 1500.0, high_hz = 8000.0))]
fn estimate_ild_wav(wav_path: &str, low_hz: f64, high_hz: f64) -> PyResult<f64> {
    let buffer = read_wav(Path::new(wav_path)).map_err(py_err)?;
    analysis::estimate_ild_with(&buffer, low_hz, high_hz).map_err(py_err)
}

/// Renders each source solo and verifies its interaural cues; report JSON.
#[pyfunction]
#[pyo3(signature = (
    plan_json,
    stems_dir,
    hrir_manifest = None,
    rir_manifest = None,
    config_path = None,
    weighting = "plain",
))]
fn analyze_render_files(
    plan_json: &str,
    stems_dir: &str,
    hrir_manifest: Option<&str>,
    rir_manifest: Option<&str>,
    config_path: Option<&str>,
    weighting: &str,
) -> PyResult<String> {
    let plan: SpatialPlan = serde_json::from_str(plan_json).map_err(py_err)?;
    let stems = if plan.sources.is_empty() {
        Vec::new()
    } else {
        load_stems_dir(Path::new(stems_dir)).map_err(py_err)?
    };
    let hrirs = hrir_manifest
        .map(|p| load_hrir_bank(Path::new(p)))
        .transpose()
        .map_err(py_err)?;
    let rirs = rir_manifest
        .map(|p| load_rir_bank(Path::new(p)))
        .transpose()
        .map_err(py_err)?;
    let cfg = config_of(config_path)?;
    let report = analysis::analyze_render_with(
        &plan,
        &stems,
        hrirs.as_ref(),
        rirs.as_ref(),
        &cfg,
        weighting_of(weighting)?,
    )
    .map_err(py_err)?;
    serde_json::to_string_pretty(&report).map_err(py_err)
}

#[pymodule]
fn stase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pan_gains, m)?)?;
    m.add_function(wrap_pyfunction!(itd_seconds, m)?)?;
    m.add_function(wrap_pyfunction!(woodworth_tau_s, m)?)?;
    m.add_function(wrap_pyfunction!(azimuth_from_itd, m)?)?;
    m.add_function(wrap_pyfunction!(parse_cues, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(retrieve, m)?)?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(render_to_file, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_itd_wav, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ild_wav, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_render_files, m)?)?;
    Ok(())
}
