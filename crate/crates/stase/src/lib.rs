//! Text-to-spatial-audio engine.
//!
//! Natural-language spatial descriptions plus monaural stems go in; a rendered
//! stereo/binaural mix comes out. The pipeline has four stages:
//!
//! 1. [`prompt_interpreter`] routes a prompt: explicit spatial cues are parsed
//!    directly, abstract scene descriptions are matched against a template bank.
//! 2. [`template_bank`] retrieves the closest spatial configuration template
//!    for abstract prompts (lexical tf-idf over a small shipped bank).
//! 3. [`conductor`] fuses the routed prompt, retrieved template, and available
//!    stems into a validated [`scene_model::SpatialPlan`].
//! 4. [`renderer`] applies the plan with a deterministic signal chain built on
//!    [`dsp_core`] primitives (constant-power panning, ITD/ILD, HRTF
//!    convolution, reverb), and [`analysis`] verifies the result by measuring
//!    interaural cues from the rendered audio.
//!
//! Everything is deterministic: the same inputs produce bit-identical plans
//! and mixes.

pub mod analysis;
pub mod audio_io;
pub mod conductor;
pub mod config;
pub mod dsp_core;
pub mod prompt_interpreter;
pub mod renderer;
pub mod scene_model;
pub mod synonyms;
pub mod template_bank;

pub use scene_model::{LocalizationMode, OutputFormat, ReverbKind, ReverbSpec, SourcePlacement, SpatialPlan, Template};
