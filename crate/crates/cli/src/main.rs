use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualtask::pipeline::{self, analyze, run_pipeline, write_analysis, AnalysisConfig, ExperimentConfig, PipelineError};
use dualtask::serve::{self, ServeState};
use dualtask_core::arith::ArithCondition;
use dualtask_core::corpus::{load_corpus, CorpusFormat};
use dualtask_core::interleave::StimulusRecord;
use dualtask_core::jsonl;
use dualtask_core::lists::{default_cells, latin_square, ExperimentList, ListDefinition, ListEntry, DEFAULT_LIST_COUNT};
use dualtask_core::report::{format_p, ReportFormat};
use dualtask_core::run::{plan_run, RunConfig};
use dualtask_core::screen::{screen_all, ScreenConfig};
use dualtask_core::synth::synthetic_corpus;
use dualtask_core::{Construction, Corpus, Plausibility, Task, TemplateSet, TrialRecord};

#[derive(Parser)]
#[command(name = "dualtask", version, about = "Dual-task sentence comprehension experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with the full construction × plausibility design.
    SynthCorpus {
        #[arg(long, default_value_t = 160)]
        items: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the default prompt templates as TOML.
    Templates {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build interleaved stimuli for a corpus.
    Stimuli {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        id_start: u64,
        /// Conditions like 1dig.2add.; all ten when omitted.
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<ArithCondition>,
    },
    /// Run an experiment config end to end and write all artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "markdown,csv,json")]
        formats: Vec<ReportFormat>,
    },
    /// Apply admission and screening to scored trials.
    Screen {
        #[command(flatten)]
        input: TrialInput,
        #[arg(long)]
        out: PathBuf,
        /// Screening thresholds as TOML; defaults otherwise.
        #[arg(long)]
        screen_config: Option<PathBuf>,
    },
    /// Contrast tables and Wilcoxon tests over screened trials.
    Stats {
        #[command(flatten)]
        input: TrialInput,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Accuracy tables, error profile and tests over screened trials.
    Report {
        #[command(flatten)]
        input: TrialInput,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_delimiter = ',', default_value = "markdown,csv,json")]
        formats: Vec<ReportFormat>,
    },
    /// Build presentation lists for the browser runner.
    Lists {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Explicit list definition (JSON); a Latin square is built otherwise.
        #[arg(long)]
        definition: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_LIST_COUNT)]
        lists: u32,
        #[arg(long, default_value_t = 65)]
        trials_per_list: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve lists to the browser runner and collect uploaded records.
    Serve {
        #[arg(long)]
        lists: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        /// Directory with the runner's static files.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct TrialInput {
    /// TrialRecord JSONL files.
    #[arg(long = "trials", required_unless_present = "sessions")]
    trials: Vec<PathBuf>,
    /// A directory of uploaded session files.
    #[arg(long)]
    sessions: Option<PathBuf>,
}

impl TrialInput {
    fn load(&self) -> Result<Vec<TrialRecord>, PipelineError> {
        let mut out = Vec::new();
        for p in &self.trials {
            out.extend(jsonl::read::<TrialRecord>(p)?);
        }
        if let Some(dir) = &self.sessions {
            out.extend(serve::load_sessions(dir)?);
        }
        Ok(out)
    }
}

#[derive(Args)]
struct AnalysisArgs {
    /// Skip the per-construction tests.
    #[arg(long)]
    no_per_construction: bool,
    #[arg(long)]
    per_condition: bool,
    #[arg(long)]
    pool_constructions: bool,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            per_construction: !self.no_per_construction,
            per_condition: self.per_condition,
            pool_constructions: self.pool_constructions,
        }
    }
}

fn corpus_from(path: &Path) -> Result<Corpus, PipelineError> {
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A Latin square over the first `per_list` item units; the next four
/// units, shown as single-task trials, are the practice block.
fn default_lists(corpus: &Corpus, n_lists: u32, per_list: usize) -> Result<ListDefinition, PipelineError> {
    let mut units: Vec<(u32, Construction)> = Vec::new();
    let mut seen = BTreeSet::new();
    for it in corpus.items() {
        if seen.insert((it.construction, it.item_id)) {
            units.push((it.item_id, it.construction));
        }
    }
    let practice_n = dualtask_core::lists::PRACTICE_TRIALS;
    if units.len() < per_list + practice_n {
        return Err(PipelineError::Config(format!(
            "corpus has {} item units, lists need {}",
            units.len(),
            per_list + practice_n
        )));
    }
    // interleave constructions rather than taking one construction's block
    units.sort_by_key(|&(id, c)| (id, c));
    let practice = units[per_list..per_list + practice_n]
        .iter()
        .enumerate()
        .map(|(i, &(item_id, construction))| ListEntry {
            item_id,
            construction,
            plausibility: Plausibility::ALL[i % 2],
            task: Task::Single,
        })
        .collect();
    latin_square(&units[..per_list], &default_cells(), n_lists, practice)
        .map_err(|e| PipelineError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::SynthCorpus { items, out } => {
            let corpus = synthetic_corpus(items, &Construction::ALL);
            corpus.save(&out, CorpusFormat::from_path(&out))?;
            println!("wrote {} items to {}", corpus.len(), out.display());
        }
        Command::Templates { out } => {
            std::fs::write(&out, TemplateSet::default().to_toml()).map_err(io(&out))?;
            println!("wrote {}", out.display());
        }
        Command::Stimuli {
            corpus,
            out,
            seed,
            id_start,
            conditions,
        } => {
            let corpus = corpus_from(&corpus)?;
            let cfg = RunConfig {
                seed,
                id_start,
                conditions: if conditions.is_empty() { ArithCondition::all() } else { conditions },
                ..RunConfig::default()
            };
            let plan = plan_run(&corpus, &TemplateSet::default(), &cfg)?;
            let rows: Vec<StimulusRecord> = plan.stimuli.iter().map(StimulusRecord::from).collect();
            jsonl::write(&out, &rows)?;
            println!("wrote {} stimuli to {}", rows.len(), out.display());
        }
        Command::Run { config, out, formats } => {
            let cfg = ExperimentConfig::load(&config)?;
            let corpus = cfg.load_corpus()?;
            let templates = cfg.load_templates()?;
            let output = run_pipeline(&corpus, &templates, &cfg)?;
            output.write(&out, &formats)?;
            let admitted = output.filter_reports.iter().filter(|r| r.subject_admitted).count();
            println!(
                "{} trials, {} retained, {}/{} subjects admitted; artifacts in {}",
                output.trials.len(),
                output.retained.len(),
                admitted,
                output.filter_reports.len(),
                out.display()
            );
            for s in &output.analysis.stats {
                println!(
                    "{:<40} {}  n={:<4} p={}{}",
                    s.grouping,
                    s.contrast,
                    s.n_effective,
                    s.p.map(format_p).unwrap_or_else(|| "-".into()),
                    if s.stars.is_empty() { String::new() } else { format!(" {}", s.stars) }
                );
            }
        }
        Command::Screen {
            input,
            out,
            screen_config,
        } => {
            let cfg = match screen_config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(io(&p))?;
                    toml::from_str::<ScreenConfig>(&text).map_err(|e| PipelineError::Config(e.to_string()))?
                }
                None => ScreenConfig::default(),
            };
            let (retained, reports) = screen_all(input.load()?, &cfg);
            std::fs::create_dir_all(&out).map_err(io(&out))?;
            jsonl::write(&out.join("retained.jsonl"), &retained)?;
            pipeline::write_json(&out.join("filter_report.json"), &reports)?;
            println!("{} trials retained", retained.len());
        }
        Command::Stats { input, out, analysis } => {
            let result = analyze(&input.load()?, &analysis.config());
            std::fs::create_dir_all(&out).map_err(io(&out))?;
            pipeline::write_json(&out.join("contrasts.json"), &result.tables)?;
            pipeline::write_json(&out.join("stats.json"), &result.stats)?;
            println!("{} tests written to {}", result.stats.len(), out.display());
        }
        Command::Report {
            input,
            out,
            analysis,
            formats,
        } => {
            let result = analyze(&input.load()?, &analysis.config());
            let files = write_analysis(&out, &[], &result, &formats)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Lists {
            corpus,
            out,
            definition,
            lists,
            trials_per_list,
            seed,
        } => {
            let corpus = corpus_from(&corpus)?;
            let def: ListDefinition = match definition {
                Some(p) => pipeline::read_json(&p)?,
                None => default_lists(&corpus, lists, trials_per_list)?,
            };
            let built = def
                .materialize(&corpus, seed, 1)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            pipeline::write_json(&out, &built)?;
            println!("wrote {} lists to {}", built.len(), out.display());
        }
        Command::Serve {
            lists,
            sessions,
            static_dir,
            addr,
        } => {
            let lists: Vec<ExperimentList> = pipeline::read_json(&lists)?;
            let state = ServeState::new(lists, &sessions).map_err(io(&sessions))?;
            serve::serve(addr, state, static_dir).map_err(io(Path::new("server")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
