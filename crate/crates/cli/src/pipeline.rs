//! End-to-end model runs: plan, query, score, screen, test, report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dualtask_client::{BackendConfig, ClientError, ModelClient};
use dualtask_core::corpus::{load_corpus, CorpusError, CorpusFormat};
use dualtask_core::jsonl::{self, JsonlError};
use dualtask_core::prompt::PromptError;
use dualtask_core::report::{
    accuracy_table, arith_accuracy_table, implausible_error_profile, Facet, Report, ReportError, ReportFormat,
};
use dualtask_core::run::{plan_run, score_run, RunConfig, RunError, RunPlan};
use dualtask_core::screen::{screen_all, FilterReport, ScreenConfig};
use dualtask_core::stats::{aggregate, did_records, ContrastTable, Grouping, StatsRecord};
use dualtask_core::synth::synthetic_corpus;
use dualtask_core::interleave::StimulusRecord;
use dualtask_core::{Construction, Corpus, TemplateSet, TrialRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which contrast tables to test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// One test per construction in addition to the overall one.
    pub per_construction: bool,
    /// One test per arithmetic condition.
    pub per_condition: bool,
    /// Pair by item id alone in the overall test.
    pub pool_constructions: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            per_construction: true,
            per_condition: false,
            pool_constructions: false,
        }
    }
}

/// Everything one model run needs, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Corpus file (CSV or JSONL by extension).
    pub corpus: Option<PathBuf>,
    /// Without a corpus file: items per construction of a synthetic corpus.
    pub synthetic_items: Option<u32>,
    /// Prompt templates; the built-in defaults when absent.
    pub templates: Option<PathBuf>,
    pub subject_id: Option<String>,
    pub parallelism: usize,
    pub run: RunConfig,
    pub backend: BackendConfig,
    pub screen: ScreenConfig,
    pub analysis: AnalysisConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            synthetic_items: None,
            templates: None,
            subject_id: None,
            parallelism: 8,
            run: RunConfig::default(),
            backend: BackendConfig::default(),
            screen: ScreenConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn subject(&self) -> String {
        self.subject_id.clone().unwrap_or_else(|| self.backend.model_name.clone())
    }

    pub fn load_corpus(&self) -> Result<Corpus, PipelineError> {
        match (&self.corpus, self.synthetic_items) {
            (Some(path), _) => Ok(load_corpus(path, CorpusFormat::from_path(path))?),
            (None, Some(n)) => Ok(synthetic_corpus(n, &Construction::ALL)),
            (None, None) => Err(PipelineError::Config("set `corpus` or `synthetic_items`".into())),
        }
    }

    pub fn load_templates(&self) -> Result<TemplateSet, PipelineError> {
        match &self.templates {
            Some(path) => Ok(TemplateSet::load(path)?),
            None => Ok(TemplateSet::default()),
        }
    }
}

/// Contrast tables for the overall analysis and any requested splits.
pub fn groupings(trials: &[TrialRecord], cfg: &AnalysisConfig) -> Vec<Grouping> {
    let mut out = vec![Grouping {
        pool_constructions: cfg.pool_constructions,
        ..Grouping::default()
    }];
    if cfg.per_construction {
        let present: BTreeSet<Construction> = trials.iter().map(|t| t.sentence_ref.construction).collect();
        out.extend(present.into_iter().map(|c| Grouping {
            constructions: Some([c].into()),
            ..Grouping::default()
        }));
    }
    if cfg.per_condition {
        let present: BTreeSet<_> = trials.iter().filter_map(|t| t.condition).collect();
        out.extend(present.into_iter().map(|c| Grouping {
            arith: Some([c].into()),
            pool_constructions: cfg.pool_constructions,
            ..Grouping::default()
        }));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub tables: Vec<ContrastTable>,
    pub stats: Vec<StatsRecord>,
    pub report: Report,
}

/// Contrasts, tests and summary tables over screened trials.
pub fn analyze(retained: &[TrialRecord], cfg: &AnalysisConfig) -> Analysis {
    let tables: Vec<ContrastTable> = groupings(retained, cfg)
        .iter()
        .map(|g| aggregate(retained, g))
        .collect();
    let stats: Vec<StatsRecord> = tables.iter().flat_map(did_records).collect();
    let report = build_report(retained, stats.clone());
    Analysis { tables, stats, report }
}

pub fn build_report(trials: &[TrialRecord], stats: Vec<StatsRecord>) -> Report {
    use Facet::*;
    let accuracy = [
        ("by task and plausibility", vec![Task, Plausibility]),
        ("by construction", vec![Subject, Construction, Task, Plausibility]),
        ("by correct answer", vec![Subject, Answer, Task, Plausibility]),
        ("by arithmetic condition", vec![Subject, Arith, Task, Plausibility]),
    ]
    .into_iter()
    .map(|(name, facets)| accuracy_table(name, trials, &facets))
    .collect();
    Report {
        accuracy,
        arith: arith_accuracy_table(trials),
        error_profile: Some(implausible_error_profile(trials)),
        stats,
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub plan: RunPlan,
    pub trials: Vec<TrialRecord>,
    pub retained: Vec<TrialRecord>,
    pub filter_reports: Vec<FilterReport>,
    pub analysis: Analysis,
    /// Requests answered by the backend rather than the cache.
    pub backend_calls: usize,
}

pub fn run_pipeline(corpus: &Corpus, templates: &TemplateSet, cfg: &ExperimentConfig) -> Result<PipelineOutput, PipelineError> {
    let plan = plan_run(corpus, templates, &cfg.run)?;
    log::info!("{} prompts for {} items", plan.prompts.len(), corpus.len());
    let client = ModelClient::new(cfg.backend.clone())?;
    let responses = client.run_batch(&plan.prompts, cfg.parallelism);
    let failed = responses.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} requests failed; scored as unparseable", responses.len());
    }
    let trials = score_run(&cfg.subject(), &plan.prompts, &responses)?;
    let (retained, filter_reports) = screen_all(trials.clone(), &cfg.screen);
    let analysis = analyze(&retained, &cfg.analysis);
    Ok(PipelineOutput {
        plan,
        trials,
        retained,
        filter_reports,
        analysis,
        backend_calls: client.backend_calls(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

impl PipelineOutput {
    /// Writes the run's artifacts under `dir` and returns their paths.
    pub fn write(&self, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, PipelineError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();
        let stimuli: Vec<StimulusRecord> = self.plan.stimuli.iter().map(StimulusRecord::from).collect();
        for (name, rows) in [("trials.jsonl", &self.trials), ("retained.jsonl", &self.retained)] {
            let path = dir.join(name);
            jsonl::write(&path, rows)?;
            written.push(path);
        }
        let path = dir.join("stimuli.jsonl");
        jsonl::write(&path, &stimuli)?;
        written.push(path);
        let path = dir.join("prompts.jsonl");
        jsonl::write(&path, &self.plan.prompts)?;
        written.push(path);
        written.extend(write_analysis(dir, &self.filter_reports, &self.analysis, formats)?);
        Ok(written)
    }
}

pub fn write_analysis(
    dir: &Path,
    filter_reports: &[FilterReport],
    analysis: &Analysis,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let path = dir.join("filter_report.json");
    write_json(&path, &filter_reports)?;
    written.push(path);
    let path = dir.join("contrasts.json");
    write_json(&path, &analysis.tables)?;
    written.push(path);
    let path = dir.join("stats.json");
    write_json(&path, &analysis.stats)?;
    written.push(path);
    for &f in formats {
        written.extend(analysis.report.emit(dir, f)?);
    }
    Ok(written)
}
