//! `psforge generate`: run trials and summarize them.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Args;
use psforge_core::metrics::aggregate;
use psforge_core::orchestrator::{
    run_trials, BackendError, HttpBackend, HttpConfig, LlmBackend, LlmRequest, LlmResponse,
    ReplayBackend, RunOptions, ScriptedBackend,
};
use psforge_core::{load_corpus, SolverConfig, TrialConfig, TrialOutcome};

use crate::config::ConfigFile;
use crate::FAILED;

pub const API_KEY_ENV: &str = "PSFORGE_API_KEY";

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory of example games for few-shot prompting
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Include example games in the prompt
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    fewshot: Option<bool>,
    /// Ask the model to reason before writing code
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    cot: Option<bool>,
    /// Ask the model for a game idea first
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    brainstorm: Option<bool>,
    /// Token budget for the example games
    #[arg(long, default_value_t = 10_000)]
    context_budget: u64,
    /// Independent trials to run
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// `http`, `replay:FILE` (JSON lines) or `mock:FILE` (replies split by `%%%` lines)
    #[arg(long, default_value = "http")]
    backend: String,
    /// Where trial directories are written
    #[arg(long, default_value = "trials")]
    out: PathBuf,
    /// Model identifier sent to the backend
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    /// Chat-completions URL for the http backend
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    endpoint: String,
    /// Attempts per trial
    #[arg(long, default_value_t = 10)]
    max_iterations: usize,
    /// Solver node budget per level
    #[arg(long, default_value_t = psforge_core::solver::DEFAULT_NODE_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f32,
    #[arg(long, default_value_t = 8192)]
    max_output_tokens: u32,
    /// Trials run in parallel
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// HTTP timeout per request in seconds
    #[arg(long, default_value_t = 600)]
    timeout: u64,
}

enum BackendSpec {
    Http,
    Replay(PathBuf),
    Mock(PathBuf),
}

fn parse_backend(spec: &str) -> anyhow::Result<BackendSpec> {
    if spec == "http" {
        return Ok(BackendSpec::Http);
    }
    match spec.split_once(':') {
        Some(("replay", path)) if !path.is_empty() => Ok(BackendSpec::Replay(path.into())),
        Some(("mock", path)) if !path.is_empty() => Ok(BackendSpec::Mock(path.into())),
        _ => bail!("unknown backend `{spec}`; expected http, replay:FILE or mock:FILE"),
    }
}

/// One recorded session consumed by consecutive trials.
struct Shared(Arc<Mutex<ReplayBackend>>);

impl LlmBackend for Shared {
    fn complete(&mut self, request: &LlmRequest) -> Result<LlmResponse, BackendError> {
        self.0.lock().expect("replay lock").complete(request)
    }
}

pub fn cmd_generate(args: &GenerateArgs, seed: u64, file: &ConfigFile) -> anyhow::Result<u8> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    if args.max_iterations == 0 {
        bail!("--max-iterations must be at least 1");
    }
    let fewshot = args.fewshot.unwrap_or(false);
    if fewshot && args.corpus.is_none() {
        bail!("--fewshot needs --corpus DIR");
    }
    let backend = parse_backend(&args.backend)?;
    if matches!(backend, BackendSpec::Replay(_)) && args.jobs > 1 {
        bail!("a replay backend serves one recorded session in order; use --jobs 1");
    }

    let corpus = match &args.corpus {
        Some(dir) => Some(load_corpus(dir).with_context(|| format!("cannot load corpus {}", dir.display()))?),
        None => None,
    };

    let factory: Box<dyn Fn(usize) -> Result<Box<dyn LlmBackend + Send>, BackendError> + Sync> = match backend {
        BackendSpec::Http => {
            let api_key = std::env::var(API_KEY_ENV)
                .ok()
                .or_else(|| file.get("api_key").map(str::to_string))
                .filter(|k| !k.is_empty());
            if api_key.is_none() {
                log::warn!("no API key set; export {API_KEY_ENV} or put api_key in the config file");
            }
            let config = HttpConfig {
                endpoint: args.endpoint.clone(),
                api_key,
                timeout: Duration::from_secs(args.timeout),
            };
            HttpBackend::new(config.clone()).context("cannot set up the http backend")?;
            Box::new(move |_| Ok(Box::new(HttpBackend::new(config.clone())?) as Box<dyn LlmBackend + Send>))
        }
        BackendSpec::Replay(path) => {
            let shared = Arc::new(Mutex::new(
                ReplayBackend::load(&path).context("cannot load the replay file")?,
            ));
            Box::new(move |_| Ok(Box::new(Shared(shared.clone())) as Box<dyn LlmBackend + Send>))
        }
        BackendSpec::Mock(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let script = ScriptedBackend::parse(&text);
            Box::new(move |_| Ok(Box::new(script.clone()) as Box<dyn LlmBackend + Send>))
        }
    };

    let base = TrialConfig {
        max_iterations: args.max_iterations,
        fewshot,
        chain_of_thought: args.cot.unwrap_or(false),
        context_budget: args.context_budget,
        brainstorm: args.brainstorm.unwrap_or(false),
        solver: SolverConfig::with_budget(args.budget),
        rng_seed: seed,
        model: args.model.clone(),
        max_output_tokens: args.max_output_tokens,
        temperature: args.temperature,
        ..TrialConfig::default()
    };
    let configs: Vec<TrialConfig> = (0..args.trials as u64)
        .map(|i| TrialConfig {
            rng_seed: seed.wrapping_add(i),
            ..base.clone()
        })
        .collect();
    let options = RunOptions {
        out_dir: Some(args.out.clone()),
        ..RunOptions::default()
    };

    let runs = run_trials(&configs, corpus.as_ref(), &options, args.jobs, factory.as_ref());
    let mut records = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let run = match run {
            Ok(run) => run,
            Err(e) => {
                println!("trial {}: backend unavailable: {e}", i + 1);
                continue;
            }
        };
        let r = &run.record;
        let outcome = match r.outcome {
            TrialOutcome::Success => format!("success at iteration {}", r.success_iteration.unwrap_or(0)),
            TrialOutcome::FailedMaxIterations => format!("failed after {} iterations", r.iterations.len()),
            TrialOutcome::BackendError => format!(
                "backend error after {} iterations: {}",
                r.iterations.len(),
                r.backend_error.as_deref().unwrap_or("")
            ),
        };
        let place = run
            .directory
            .as_ref()
            .map(|d| format!(" -> {}", d.display()))
            .unwrap_or_default();
        println!("trial {} (seed {}): {outcome}{place}", i + 1, r.config.rng_seed);
        records.push(run.record);
    }
    if !records.is_empty() {
        println!();
        print!("{}", aggregate(&records, &[]).to_text());
    }
    let any_success = records.iter().any(|r| r.outcome == TrialOutcome::Success);
    Ok(if any_success { 0 } else { FAILED })
}
