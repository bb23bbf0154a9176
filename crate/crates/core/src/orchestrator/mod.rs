//! The generate, compile, playtest and feedback loop.

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::compiler::compile;
use crate::corpus::{sample_fewshot, Corpus, CorpusEntry, FewshotSample};
use crate::diagnostic::{render, Diagnostic};
use crate::grammar::{parse_game, repair_source};
use crate::metrics::{evaluate_compiled, EvalThresholds, GameEvalReport};
use crate::solver::SolverConfig;
use crate::source::SourceText;

pub mod backend;
pub mod persist;
pub mod prompt;

pub use backend::{
    BackendError, HttpBackend, HttpConfig, LlmBackend, LlmRequest, LlmResponse, ReplayBackend,
    ScriptedBackend, Usage,
};
pub use persist::{find_trial_dirs, load_trial_record, persist_trial};
pub use prompt::{build_prompt, extract_code, Prompt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub max_iterations: usize,
    pub fewshot: bool,
    pub chain_of_thought: bool,
    /// Token budget for the few-shot examples.
    pub context_budget: u64,
    pub brainstorm: bool,
    pub solver: SolverConfig,
    pub eval: EvalThresholds,
    pub rng_seed: u64,
    pub model: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            fewshot: false,
            chain_of_thought: false,
            context_budget: 10_000,
            brainstorm: false,
            solver: SolverConfig::default(),
            eval: EvalThresholds::default(),
            rng_seed: 0,
            model: "gpt-4o".into(),
            max_output_tokens: 8192,
            temperature: 1.0,
        }
    }
}

impl TrialConfig {
    fn request(&self, system_text: &str, user_text: &str) -> LlmRequest {
        LlmRequest {
            system_text: system_text.to_string(),
            user_text: user_text.to_string(),
            max_output_tokens: self.max_output_tokens,
            temperature: self.temperature,
            model: self.model.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Success,
    FailedMaxIterations,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Counted from 1.
    pub index: usize,
    pub prompt: String,
    pub raw_response: String,
    pub extracted_source: Option<SourceText>,
    pub repairs: Vec<String>,
    /// Set when repairs changed the extracted source; diagnostics refer to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired_source: Option<SourceText>,
    pub syntax_diagnostics: Vec<Diagnostic>,
    pub compile_diagnostics: Vec<Diagnostic>,
    pub eval: Option<GameEvalReport>,
    /// Text carried into the next prompt; empty on success and on the last
    /// iteration.
    pub feedback_rendered: String,
}

impl IterationRecord {
    /// The source the diagnostics and evaluation refer to.
    pub fn game_source(&self) -> Option<&SourceText> {
        self.repaired_source.as_ref().or(self.extracted_source.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: TrialConfig,
    pub started_at: String,
    pub finished_at: String,
    pub fewshot: Option<FewshotSample>,
    pub idea: Option<String>,
    /// Identical for every iteration of a trial.
    pub system_text: String,
    pub iterations: Vec<IterationRecord>,
    pub outcome: TrialOutcome,
    /// Counted from 1.
    pub success_iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

impl TrialRecord {
    pub fn final_report(&self) -> Option<&GameEvalReport> {
        self.iterations.last().and_then(|i| i.eval.as_ref())
    }

    pub fn group_label(&self, keys: &[GroupKey]) -> String {
        if keys.is_empty() {
            return "all".into();
        }
        keys.iter()
            .map(|k| k.value(&self.config))
            .collect::<Vec<_>>()
            .join("/")
    }

    /// The record with timestamps blanked, for comparing runs.
    pub fn without_timestamps(&self) -> TrialRecord {
        TrialRecord {
            started_at: String::new(),
            finished_at: String::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    Fewshot,
    ChainOfThought,
    ContextBudget,
    Brainstorm,
    Model,
}

impl GroupKey {
    pub const ALL: [GroupKey; 5] = [
        GroupKey::Fewshot,
        GroupKey::ChainOfThought,
        GroupKey::ContextBudget,
        GroupKey::Brainstorm,
        GroupKey::Model,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Fewshot => "fewshot",
            GroupKey::ChainOfThought => "cot",
            GroupKey::ContextBudget => "context_budget",
            GroupKey::Brainstorm => "brainstorm",
            GroupKey::Model => "model",
        }
    }

    pub fn parse(name: &str) -> Option<GroupKey> {
        let name = name.trim().to_ascii_lowercase().replace('-', "_");
        match name.as_str() {
            "chain_of_thought" => Some(GroupKey::ChainOfThought),
            _ => GroupKey::ALL.into_iter().find(|k| k.name() == name),
        }
    }

    /// A comma-separated key list such as `fewshot,cot`.
    pub fn parse_list(list: &str) -> Result<Vec<GroupKey>, String> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| GroupKey::parse(s).ok_or_else(|| format!("unknown group key `{}`", s.trim())))
            .collect()
    }

    fn value(self, config: &TrialConfig) -> String {
        let flag = |b: bool| if b { "T" } else { "F" }.to_string();
        match self {
            GroupKey::Fewshot => flag(config.fewshot),
            GroupKey::ChainOfThought => flag(config.chain_of_thought),
            GroupKey::ContextBudget => config.context_budget.to_string(),
            GroupKey::Brainstorm => flag(config.brainstorm),
            GroupKey::Model => config.model.clone(),
        }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Transient backend failures are retried after the listed delays; the
/// trial gives up after `max_failures` in a row.
#[derive(Clone)]
pub struct RetryPolicy {
    pub max_failures: usize,
    pub delays: Vec<Duration>,
    pub sleep: Sleeper,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_failures: 3,
            delays: [1, 2, 4].map(Duration::from_secs).to_vec(),
            sleep: Arc::new(std::thread::sleep),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            sleep: Arc::new(|_| {}),
            ..Self::default()
        }
    }
}

impl fmt::Debug for RetryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RetryPolicy")
            .field("max_failures", &self.max_failures)
            .field("delays", &self.delays)
            .finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root under which trial directories are created; nothing is written
    /// when unset.
    pub out_dir: Option<PathBuf>,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub record: TrialRecord,
    /// Every backend response in call order, as written to `session.jsonl`.
    pub session: Vec<LlmResponse>,
    pub directory: Option<PathBuf>,
}

fn call_backend(
    backend: &mut dyn LlmBackend,
    request: &LlmRequest,
    retry: &RetryPolicy,
) -> Result<LlmResponse, BackendError> {
    let mut failures = 0;
    loop {
        match backend.complete(request) {
            Ok(response) => return Ok(response),
            Err(e) if e.is_transient() => {
                failures += 1;
                log::warn!("backend call failed ({failures}/{}): {e}", retry.max_failures);
                if failures >= retry.max_failures {
                    return Err(e);
                }
                let delay = retry
                    .delays
                    .get(failures - 1)
                    .or(retry.delays.last())
                    .copied()
                    .unwrap_or_default();
                (retry.sleep)(delay);
            }
            Err(e) => return Err(e),
        }
    }
}

pub fn brainstorm(
    backend: &mut dyn LlmBackend,
    config: &TrialConfig,
    retry: &RetryPolicy,
) -> Result<LlmResponse, BackendError> {
    let request = config.request(
        "You are a puzzle game designer.",
        prompt::BRAINSTORM_INSTRUCTION,
    );
    call_backend(backend, &request, retry)
}

fn render_feedback(iteration: &IterationRecord, config: &TrialConfig) -> String {
    let Some(source) = iteration.game_source() else {
        return prompt::NO_CODE_FEEDBACK.to_string();
    };
    let mut out = String::from("Your previous game did not meet the goal. Fix the problems below.\n");
    out.push_str("\nPrevious code:\n```\n");
    out.push_str(source.content());
    if !source.content().ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
    if !iteration.repairs.is_empty() {
        out.push_str("\nAutomatic repairs applied to the code above:\n");
        for repair in &iteration.repairs {
            out.push_str(&format!("- {repair}\n"));
        }
    }
    if !iteration.syntax_diagnostics.is_empty() {
        out.push_str("\nSyntax diagnostics:\n");
        out.push_str(&render(&iteration.syntax_diagnostics));
    }
    if !iteration.compile_diagnostics.is_empty() {
        out.push_str("\nCompile diagnostics:\n");
        out.push_str(&render(&iteration.compile_diagnostics));
    }
    if let Some(report) = iteration.eval.as_ref().filter(|r| r.compiles) {
        out.push_str("\nSolver results:\n");
        let lines = report.feedback_lines();
        if lines.is_empty() {
            out.push_str("the game has no playable levels\n");
        }
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!(
            "Every level must be solvable, and its shortest solution must be longer than {} moves.\n",
            config.eval.all_solvable_min_length
        ));
    }
    out
}

/// Extraction, repair, compilation and evaluation of one response.
fn examine(index: usize, prompt: String, raw_response: String, config: &TrialConfig) -> IterationRecord {
    let mut record = IterationRecord {
        index,
        prompt,
        extracted_source: extract_code(&raw_response),
        raw_response,
        repairs: Vec::new(),
        repaired_source: None,
        syntax_diagnostics: Vec::new(),
        compile_diagnostics: Vec::new(),
        eval: None,
        feedback_rendered: String::new(),
    };
    let Some(extracted) = record.extracted_source.clone() else {
        return record;
    };

    let mut parsed = parse_game(&extracted);
    if parsed.syntax_errors() > 0 {
        let outcome = repair_source(&extracted, &parsed.diagnostics);
        if !outcome.repairs.is_empty() {
            parsed = parse_game(&outcome.repaired);
            record.repairs = outcome.repairs;
            record.repaired_source = Some(outcome.repaired);
        }
    }
    record.syntax_diagnostics = parsed.diagnostics;

    let report = match parsed.spec {
        Some(spec) => {
            let compiled = compile(&spec);
            record.compile_diagnostics = compiled.diagnostics;
            match compiled.game {
                Some(game) => evaluate_compiled(&game, &config.eval, &config.solver),
                None => GameEvalReport::not_compiled(),
            }
        }
        None => GameEvalReport::not_compiled(),
    };
    record.eval = Some(report);
    record
}

fn is_success(iteration: &IterationRecord) -> bool {
    iteration
        .eval
        .as_ref()
        .is_some_and(|r| r.compiles && r.all_solvable)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs one trial to success, the iteration cap or a backend failure, and
/// persists it when `options.out_dir` is set. Persistence failures are
/// logged and leave `directory` empty.
pub fn run_trial(
    backend: &mut dyn LlmBackend,
    corpus: Option<&Corpus>,
    config: &TrialConfig,
    options: &RunOptions,
) -> TrialRun {
    let started_at = now();
    let mut session = Vec::new();
    let mut backend_error = None;

    let fewshot = config.fewshot.then(|| match corpus {
        Some(corpus) => sample_fewshot(corpus, config.context_budget, config.rng_seed),
        None => {
            log::warn!("few-shot prompting requested without a corpus");
            sample_fewshot(&Corpus::default(), config.context_budget, config.rng_seed)
        }
    });
    let examples: Vec<&CorpusEntry> = match (&fewshot, corpus) {
        (Some(sample), Some(corpus)) => sample.games.iter().filter_map(|id| corpus.get(id)).collect(),
        _ => Vec::new(),
    };

    let mut idea = None;
    if config.brainstorm {
        match brainstorm(backend, config, &options.retry) {
            Ok(response) => {
                idea = Some(response.text.trim().to_string());
                session.push(response);
            }
            Err(e) => backend_error = Some(e.to_string()),
        }
    }

    let system_text = build_prompt(config, &examples, None, None).system_text;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut success_iteration = None;
    let max_iterations = config.max_iterations.max(1);

    for index in 1..=max_iterations {
        if backend_error.is_some() {
            break;
        }
        let prompt = build_prompt(config, &examples, idea.as_deref(), iterations.last());
        let request = config.request(&prompt.system_text, &prompt.user_text);
        let response = match call_backend(backend, &request, &options.retry) {
            Ok(response) => response,
            Err(e) => {
                backend_error = Some(e.to_string());
                break;
            }
        };
        let mut iteration = examine(index, prompt.user_text, response.text.clone(), config);
        session.push(response);

        let success = is_success(&iteration);
        if !success && index < max_iterations {
            iteration.feedback_rendered = render_feedback(&iteration, config);
        }
        iterations.push(iteration);
        if success {
            success_iteration = Some(index);
            break;
        }
    }

    let outcome = if success_iteration.is_some() {
        TrialOutcome::Success
    } else if backend_error.is_some() {
        TrialOutcome::BackendError
    } else {
        TrialOutcome::FailedMaxIterations
    };
    let record = TrialRecord {
        config: config.clone(),
        started_at,
        finished_at: now(),
        fewshot,
        idea,
        system_text,
        iterations,
        outcome,
        success_iteration,
        backend_error,
    };

    let directory = options.out_dir.as_ref().and_then(|root| {
        persist_trial(root, &record, &session)
            .map_err(|e| log::error!("could not save trial under {}: {e}", root.display()))
            .ok()
    });
    TrialRun {
        record,
        session,
        directory,
    }
}

pub type BackendFactory<'a> =
    dyn Fn(usize) -> Result<Box<dyn LlmBackend + Send>, BackendError> + Sync + 'a;

/// Runs independent trials on up to `jobs` threads. Results keep the order
/// of `configs`. A factory failure is reported for that trial only.
pub fn run_trials(
    configs: &[TrialConfig],
    corpus: Option<&Corpus>,
    options: &RunOptions,
    jobs: usize,
    make_backend: &BackendFactory<'_>,
) -> Vec<Result<TrialRun, BackendError>> {
    let results: Mutex<Vec<Option<Result<TrialRun, BackendError>>>> =
        Mutex::new(configs.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(config) = configs.get(i) else {
            break;
        };
        let result = make_backend(i).map(|mut backend| run_trial(&mut backend, corpus, config, options));
        results.lock().expect("no worker panicked")[i] = Some(result);
    };
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            scope.spawn(worker);
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}
