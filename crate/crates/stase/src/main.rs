//! Command-line surface for the engine: plan, render, analyze, templates.
//!
//! Exit codes: 0 success, 1 analysis tolerance failure, 2 usage or load
//! errors. Stdout carries data (tables, listings); stderr carries
//! diagnostics and warnings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stase::analysis::{analyze_render_with, ItdWeighting};
use stase::audio_io::{
    load_hrir_bank, load_rir_bank, load_stems_dir, write_wav, SampleFormat, Stem,
};
use stase::conductor::{build_plan, ConductorBackend, StemInput};
use stase::config::EngineConfig;
use stase::renderer::render;
use stase::template_bank::load_bank;
use stase::SpatialPlan;

const DEFAULT_TEMPLATES: &str = "data/templates.json";

#[derive(Parser)]
#[command(
    name = "stase",
    version,
    about = "Text-to-spatial-audio engine: plans, binaural renders, and interaural-cue analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    /// Delegate plan building to the remote endpoint from STASE_LLM_*.
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingChoice {
    Plain,
    Phat,
}

impl From<WeightingChoice> for ItdWeighting {
    fn from(choice: WeightingChoice) -> Self {
        match choice {
            WeightingChoice::Plain => ItdWeighting::Plain,
            WeightingChoice::Phat => ItdWeighting::Phat,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a spatial plan from a prompt and a directory of stems.
    Plan {
        /// Scene description, either explicit cues or an abstract mood.
        #[arg(long)]
        prompt: String,
        /// Directory of mono WAV stems; file names become stem ids.
        #[arg(long)]
        stems: PathBuf,
        /// Template bank JSON.
        #[arg(long, default_value = DEFAULT_TEMPLATES)]
        templates: PathBuf,
        /// Output plan path.
        #[arg(long)]
        out: PathBuf,
        /// Plan backend; defaults to the deterministic rule-based planner.
        #[arg(long, value_enum)]
        backend: Option<BackendChoice>,
    },
    /// Render a plan to a stereo WAV file.
    Render {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        stems: PathBuf,
        /// HRIR bank manifest (needed when any source uses hrtf mode).
        #[arg(long)]
        hrir: Option<PathBuf>,
        /// RIR bank manifest (needed for RIR-convolution reverb).
        #[arg(long)]
        rir: Option<PathBuf>,
        /// Output WAV path (32-bit float).
        #[arg(long)]
        out: PathBuf,
        /// Also write a per-source render trace next to the output.
        #[arg(long)]
        trace: bool,
        /// Engine config file (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Verify a plan's spatial cues from solo renders.
    Analyze {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        stems: PathBuf,
        #[arg(long)]
        hrir: Option<PathBuf>,
        #[arg(long)]
        rir: Option<PathBuf>,
        /// Report JSON output path.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cross-correlation weighting for the ITD estimate; phat is more
        /// robust on tonal stems.
        #[arg(long, value_enum, default_value_t = WeightingChoice::Plain)]
        weighting: WeightingChoice,
    },
    /// Inspect the template bank.
    Templates {
        #[command(subcommand)]
        action: TemplatesAction,
    },
}

#[derive(Subcommand)]
enum TemplatesAction {
    /// List template ids and names.
    List {
        #[arg(long, default_value = DEFAULT_TEMPLATES)]
        templates: PathBuf,
    },
    /// Print one template as JSON.
    Show {
        id: String,
        #[arg(long, default_value = DEFAULT_TEMPLATES)]
        templates: PathBuf,
    },
}

struct CliError(String);

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        let mut message = e.to_string();
        let mut source = e.source();
        while let Some(s) = source {
            let text = s.to_string();
            // Skip causes a thiserror message already interpolated.
            if !message.contains(&text) {
                message.push_str(&format!(": {text}"));
            }
            source = s.source();
        }
        CliError(message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Plan {
            prompt,
            stems,
            templates,
            out,
            backend,
        } => cmd_plan(&prompt, &stems, &templates, &out, backend),
        Command::Render {
            plan,
            stems,
            hrir,
            rir,
            out,
            trace,
            config,
        } => cmd_render(&plan, &stems, hrir.as_deref(), rir.as_deref(), &out, trace, config.as_deref()),
        Command::Analyze {
            plan,
            stems,
            hrir,
            rir,
            report,
            config,
            weighting,
        } => cmd_analyze(
            &plan,
            &stems,
            hrir.as_deref(),
            rir.as_deref(),
            &report,
            config.as_deref(),
            weighting.into(),
        ),
        Command::Templates { action } => cmd_templates(action),
    }
}

fn load_stems_checked(dir: &Path) -> Result<(Vec<Stem>, u32), CliError> {
    let stems = load_stems_dir(dir)?;
    let rate = stems[0].buffer.sample_rate_hz();
    if let Some(odd) = stems.iter().find(|s| s.buffer.sample_rate_hz() != rate) {
        return Err(CliError(format!(
            "stems disagree on sample rate: {} is {} Hz but {} is {} Hz",
            stems[0].stem_id,
            rate,
            odd.stem_id,
            odd.buffer.sample_rate_hz()
        )));
    }
    Ok((stems, rate))
}

fn read_plan(path: &Path) -> Result<SpatialPlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read plan {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError(format!("plan {} is not valid: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    match path {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
}

fn cmd_plan(
    prompt: &str,
    stems_dir: &Path,
    templates: &Path,
    out: &Path,
    backend: Option<BackendChoice>,
) -> Result<ExitCode, CliError> {
    let (stems, rate) = load_stems_checked(stems_dir)?;
    let bank = load_bank(templates)?;
    let backend = match backend {
        None => ConductorBackend::RuleBased,
        Some(BackendChoice::Remote) => match ConductorBackend::from_env() {
            remote @ ConductorBackend::Remote(_) => remote,
            ConductorBackend::RuleBased => {
                return Err(CliError(
                    "--backend remote requires STASE_LLM_ENDPOINT to be set".into(),
                ))
            }
        },
    };
    let inputs: Vec<StemInput> = stems
        .iter()
        .map(|s| StemInput::from_id(s.stem_id.clone()))
        .collect();
    let outcome = build_plan(prompt, &inputs, &backend, &bank, rate)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    write_json(out, &outcome.plan)?;
    eprintln!(
        "wrote plan with {} sources to {}",
        outcome.plan.sources.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_render(
    plan_path: &Path,
    stems_dir: &Path,
    hrir: Option<&Path>,
    rir: Option<&Path>,
    out: &Path,
    trace: bool,
    config: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let plan = read_plan(plan_path)?;
    let (stems, _) = load_stems_checked(stems_dir)?;
    let cfg = load_config(config)?;
    let hrirs = hrir.map(load_hrir_bank).transpose()?;
    let rirs = rir.map(load_rir_bank).transpose()?;
    let (mix, render_trace) = render(&plan, &stems, hrirs.as_ref(), rirs.as_ref(), &cfg)?;
    write_wav(out, &mix, SampleFormat::Float32)?;
    if trace {
        let trace_path = out.with_extension("trace.json");
        write_json(&trace_path, &render_trace)?;
        eprintln!("wrote trace to {}", trace_path.display());
    }
    eprintln!(
        "wrote {} samples at {} Hz to {}",
        mix.num_samples(),
        mix.sample_rate_hz(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(
    plan_path: &Path,
    stems_dir: &Path,
    hrir: Option<&Path>,
    rir: Option<&Path>,
    report_path: &Path,
    config: Option<&Path>,
    weighting: ItdWeighting,
) -> Result<ExitCode, CliError> {
    let plan = read_plan(plan_path)?;
    let cfg = load_config(config)?;
    let hrirs = hrir.map(load_hrir_bank).transpose()?;
    let rirs = rir.map(load_rir_bank).transpose()?;
    // An empty plan analyzes to an empty report without touching stems.
    let report = if plan.sources.is_empty() {
        analyze_render_with(&plan, &[], hrirs.as_ref(), rirs.as_ref(), &cfg, weighting)?
    } else {
        let (stems, _) = load_stems_checked(stems_dir)?;
        analyze_render_with(&plan, &stems, hrirs.as_ref(), rirs.as_ref(), &cfg, weighting)?
    };
    write_json(report_path, &report)?;
    print!("{}", report.render_table());
    if report.all_within_tolerance {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "analysis failed: at least one source deviates more than {} degrees",
            report.tolerance_deg
        );
        Ok(ExitCode::from(1))
    }
}

fn cmd_templates(action: TemplatesAction) -> Result<ExitCode, CliError> {
    match action {
        TemplatesAction::List { templates } => {
            let bank = load_bank(&templates)?;
            let width = bank
                .templates()
                .iter()
                .map(|t| t.template_id.len())
                .max()
                .unwrap_or(0);
            for t in bank.templates() {
                println!("{:<width$}  {}", t.template_id, t.name);
            }
            Ok(ExitCode::SUCCESS)
        }
        TemplatesAction::Show { id, templates } => {
            let bank = load_bank(&templates)?;
            let template = bank
                .get(&id)
                .ok_or_else(|| CliError(format!("no template with id {id:?}")))?;
            let mut text = serde_json::to_string_pretty(template)
                .map_err(|e| CliError(format!("cannot serialize template: {e}")))?;
            text.push('\n');
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
