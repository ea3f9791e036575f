//! Command-line front end. Machine-readable JSON goes to stdout, a short
//! human summary to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::asv::{
    embed, load_external_embeddings, mfcc, write_embeddings, Embedding, ScorerConfig,
};
use crate::audio::{load_wav, save_wav_with_format, SampleFormat};
use crate::disguise::{disguise, DisguiseFamily, DisguiseSpec};
use crate::error::{Error, Result};
use crate::eval::{
    gen_trials, load_corpus, load_trial_set, render_report, render_trials, run_matrix,
    synth_corpus, write_corpus, write_trial_bundle, CorpusConfig, DisguisePolicy, MatrixOptions,
    Restoration, TRIAL_LIST,
};
use crate::restore::{
    f0_ratio_restore, grid_search_restore, restore_audio, restored_key, GridSpec, Restorer,
    Resynthesis, Utterance,
};

#[derive(Debug, Parser)]
#[command(
    name = "voxrestore",
    version,
    about = "Voice disguise, restoration and speaker-verification evaluation"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, env = "VOXRESTORE_LOG", default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a disguise to a WAV file.
    Disguise(DisguiseArgs),
    /// Estimate the disguise parameter of a test utterance against an enrollment.
    Estimate(EstimateArgs),
    /// Synthesize a toy multi-speaker corpus.
    Corpus(CorpusArgs),
    /// Generate a trial list with rendered test audio from a corpus.
    Trials(TrialsArgs),
    /// Score a trial list under one or more restorations.
    Eval(EvalArgs),
    /// Dump restored-candidate embeddings for every trial in sidecar format.
    Prerestore(PrerestoreArgs),
    /// Dump builtin embeddings of WAV files or of every trial token.
    Embed(EmbedArgs),
}

#[derive(Debug, Args)]
pub struct DisguiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `family:param`, e.g. `pitch-freq:4` or `vtln-power:-0.25`.
    #[arg(long)]
    pub spec: DisguiseSpec,
    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Grid,
    F0ratio,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Enrollment WAV (or embedding id with an external scorer).
    #[arg(long)]
    pub enroll: String,
    /// Test WAV (or embedding id with an external scorer).
    #[arg(long)]
    pub test: String,
    #[arg(long, default_value = "pitch-freq")]
    pub family: DisguiseFamily,
    /// `default` or `start:stop:step`.
    #[arg(long, default_value = "default")]
    pub grid: String,
    /// `builtin` or `external:<embedding file>`.
    #[arg(long, default_value = "builtin")]
    pub scorer: String,
    #[arg(long, value_enum, default_value_t = Method::Grid)]
    pub method: Method,
    /// Also write the restored test audio here.
    #[arg(long)]
    pub restored_out: Option<PathBuf>,
    /// Resynthesize restored audio by Griffin-Lim with this many iterations
    /// instead of reusing the warped phases.
    #[arg(long)]
    pub griffin_lim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub speakers: usize,
    #[arg(long, default_value_t = 5)]
    pub utts: usize,
    #[arg(long, default_value_t = 1.5)]
    pub duration: f64,
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
}

#[derive(Debug, Args)]
pub struct TrialsArgs {
    /// Corpus directory or its `corpus.lst`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for `trials.txt` and `audio/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// `none`, `mixed-vtln`, `<family>` or `<family>:<min>:<max>`.
    #[arg(long, default_value = "none")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub trials: PathBuf,
    /// `none`, `f0ratio` or a family name; repeatable.
    #[arg(long = "restore", default_values_t = vec!["none".to_string()])]
    pub restorations: Vec<String>,
    #[arg(long, default_value = "builtin")]
    pub scorer: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Disguise label for the report rows; derived from the trial list when absent.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct PrerestoreArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long, default_value = "pitch-freq")]
    pub family: DisguiseFamily,
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Embed every token of this trial list.
    #[arg(long, conflicts_with = "wavs")]
    pub trials: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// WAV files; each is keyed by its path as given.
    pub wavs: Vec<PathBuf>,
}

/// Parses arguments, runs, and maps errors to exit status 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Warn);
    // A second initialization (tests driving `run` repeatedly) is harmless.
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Disguise(a) => cmd_disguise(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Corpus(a) => cmd_corpus(a, cli.seed),
        Command::Trials(a) => cmd_trials(a, cli.seed),
        Command::Eval(a) => cmd_eval(a, cli.jobs),
        Command::Prerestore(a) => cmd_prerestore(a),
        Command::Embed(a) => cmd_embed(a),
    })
}

fn emit(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string(&value)?);
    Ok(())
}

pub fn parse_scorer(text: &str) -> Result<ScorerConfig> {
    match text.split_once(':') {
        None if text == "builtin" => Ok(ScorerConfig::Builtin),
        Some(("external", path)) if !path.is_empty() => {
            Ok(ScorerConfig::external(load_external_embeddings(path)?))
        }
        _ => Err(Error::InvalidArgument(format!(
            "scorer `{text}` is not `builtin` or `external:<path>`"
        ))),
    }
}

fn cmd_disguise(a: &DisguiseArgs) -> Result<()> {
    let x = load_wav(&a.input)?;
    let y = disguise(&x, &a.spec)?;
    let format = if a.float {
        SampleFormat::Float32
    } else {
        SampleFormat::Pcm16
    };
    save_wav_with_format(&y, &a.out, format)?;
    eprintln!(
        "{} -> {} ({}, {} -> {} samples)",
        a.input.display(),
        a.out.display(),
        a.spec,
        x.len(),
        y.len()
    );
    emit(json!({
        "input": a.input,
        "output": a.out,
        "spec": a.spec.to_string(),
    }))
}

/// Loads `token` as audio when it names a file; an external scorer may
/// instead know it as an embedding id.
fn load_token(token: &str, scorer: &ScorerConfig) -> Result<Option<crate::audio::AudioBuffer>> {
    if Path::new(token).is_file() {
        return load_wav(token).map(Some);
    }
    match scorer {
        ScorerConfig::External(t) if t.contains_key(token) => Ok(None),
        _ => load_wav(token).map(Some),
    }
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let scorer = parse_scorer(&a.scorer)?;
    let x = load_token(&a.enroll, &scorer)?;
    let y = load_token(&a.test, &scorer)?;
    let ux = Utterance {
        id: &a.enroll,
        audio: x.as_ref(),
    };
    let uy = Utterance {
        id: &a.test,
        audio: y.as_ref(),
    };
    let result = match a.method {
        Method::Grid => {
            let grid = GridSpec::parse(a.family, &a.grid)?;
            grid_search_restore(ux, uy, &grid, &scorer)?
        }
        Method::F0ratio => f0_ratio_restore(ux, uy, a.family, &scorer)?,
    };
    if let Some(out) = &a.restored_out {
        let y = y
            .as_ref()
            .ok_or_else(|| Error::UnknownUtterance(a.test.clone()))?;
        let resynthesis = match a.griffin_lim {
            Some(iterations) => Resynthesis::GriffinLim { iterations },
            None => Resynthesis::WarpedPhase,
        };
        let restored = restore_audio(y, result.alpha_hat, result.family, resynthesis)?;
        save_wav_with_format(&restored, out, SampleFormat::Pcm16)?;
    }
    eprintln!(
        "{}: alpha_hat = {}, d_hat = {:.6}",
        result.family, result.alpha_hat, result.d_hat
    );
    emit(serde_json::to_value(&result)?)
}

fn cmd_corpus(a: &CorpusArgs, seed: u64) -> Result<()> {
    let config = CorpusConfig {
        n_speakers: a.speakers,
        utts_per_speaker: a.utts,
        seed,
        sample_rate: a.sample_rate,
        duration_s: a.duration,
    };
    let corpus = synth_corpus(&config)?;
    write_corpus(&a.out, &corpus)?;
    eprintln!(
        "{} utterances from {} speakers -> {}",
        corpus.utterances.len(),
        corpus.speakers().len(),
        a.out.display()
    );
    emit(json!({
        "out": a.out,
        "config": config,
        "utterances": corpus.utterances.len(),
    }))
}

fn cmd_trials(a: &TrialsArgs, seed: u64) -> Result<()> {
    let policy: DisguisePolicy = a.policy.parse()?;
    let corpus = load_corpus(&a.corpus)?;
    let planned = gen_trials(&corpus, a.n, &policy, seed)?;
    info!("rendering {} trials", planned.len());
    let audio = render_trials(&corpus, &planned)?;
    let trials = write_trial_bundle(&a.out, &planned, &audio)?;
    let same = trials.iter().filter(|t| t.label == Some(true)).count();
    eprintln!(
        "{} trials ({same} same-speaker), policy {policy} -> {}",
        trials.len(),
        a.out.join(TRIAL_LIST).display()
    );
    emit(json!({
        "trials": a.out.join(TRIAL_LIST),
        "n_trials": trials.len(),
        "n_same": same,
        "policy": policy.to_string(),
    }))
}

fn cmd_eval(a: &EvalArgs, jobs: usize) -> Result<()> {
    let restorations = a
        .restorations
        .iter()
        .map(|r| r.parse())
        .collect::<Result<Vec<Restoration>>>()?;
    let scorer = parse_scorer(&a.scorer)?;
    let set = load_trial_set(&a.trials, &scorer)?;
    let options = MatrixOptions {
        jobs,
        label: a.label.clone(),
    };
    let report = run_matrix(&set, &restorations, &scorer, &options)?;
    // Everything is rendered before the first write.
    let files = render_report(&a.out, &report)?;
    for (path, bytes) in &files {
        crate::fsutil::write_atomic(path, bytes)?;
    }
    for row in &report.matrix {
        eprintln!(
            "{:>12} / {:<14} EER {:6.2}%  ({} same, {} diff)",
            row.disguise, row.restoration, row.eer, row.n_same, row.n_diff
        );
    }
    emit(json!({
        "report": a.out,
        "files": files.iter().map(|(p, _)| p).collect::<Vec<_>>(),
        "matrix": report.matrix,
    }))
}

fn cmd_prerestore(a: &PrerestoreArgs) -> Result<()> {
    use rayon::prelude::*;
    let grid = GridSpec::parse(a.family, &a.grid)?;
    let set = load_trial_set(&a.trials, &ScorerConfig::Builtin)?;
    let mut tests: Vec<&str> = set.trials.iter().map(|t| t.test_id.as_str()).collect();
    tests.sort_unstable();
    tests.dedup();
    let restored = tests
        .par_iter()
        .map(|&id| {
            let restorer = Restorer::new(&set.audio[id])?;
            grid.values()
                .iter()
                .map(|&alpha| {
                    let e = embed(&restorer.features(grid.family(), alpha)?)?;
                    Ok(e.with_id(restored_key(id, grid.family(), alpha)))
                })
                .collect::<Result<Vec<Embedding>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let plain = plain_embeddings(set.audio.iter().map(|(k, v)| (k.as_str(), v)))?;
    let all: Vec<&Embedding> = plain.iter().chain(restored.iter().flatten()).collect();
    write_embeddings(&a.out, all.iter().copied())?;
    eprintln!(
        "{} embeddings ({} tests x {} candidates) -> {}",
        all.len(),
        tests.len(),
        grid.len(),
        a.out.display()
    );
    emit(json!({ "out": a.out, "embeddings": all.len() }))
}

fn plain_embeddings<'a>(
    items: impl Iterator<Item = (&'a str, &'a crate::audio::AudioBuffer)>,
) -> Result<Vec<Embedding>> {
    use rayon::prelude::*;
    let items: Vec<_> = items.collect();
    items
        .par_iter()
        .map(|(id, audio)| Ok(embed(&mfcc(audio)?)?.with_id(*id)))
        .collect()
}

fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    let embeddings = match &a.trials {
        Some(trials) => {
            let set = load_trial_set(trials, &ScorerConfig::Builtin)?;
            plain_embeddings(set.audio.iter().map(|(k, v)| (k.as_str(), v)))?
        }
        None => {
            if a.wavs.is_empty() {
                return Err(Error::EmptyInput("WAV files"));
            }
            let loaded = a
                .wavs
                .iter()
                .map(|p| Ok((p.to_string_lossy().into_owned(), load_wav(p)?)))
                .collect::<Result<Vec<_>>>()?;
            plain_embeddings(loaded.iter().map(|(k, v)| (k.as_str(), v)))?
        }
    };
    write_embeddings(&a.out, &embeddings)?;
    eprintln!("{} embeddings -> {}", embeddings.len(), a.out.display());
    emit(json!({ "out": a.out, "embeddings": embeddings.len() }))
}
