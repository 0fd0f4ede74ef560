//! Command-line interface: `toy`, `train`, `synth`, `align`, `loglik`, `inspect`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod config;
mod train;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{RunConfig, SEED_ENV};
pub use train::{evaluate, LogRecord, Trainer};

use crate::data::{
    alignment_accuracy, generate_toy_corpus, load_corpus, save_melbin, write_gold, write_manifest, ManifestEntry,
    ToySpec, Utterance, Vocabulary,
};
use crate::error::{Error, Result};
use crate::kv;
use crate::lattice::{model_lattice, viterbi, write_alignment};
use crate::model::checkpoint::Checkpoint;
use crate::numerics::AdamConfig;
use crate::synthesis::{rate_report, synthesize, AcousticMode, DurationMode};

#[derive(Parser, Debug)]
#[command(
    name = "nhmm",
    version,
    about = "Neural HMM acoustic model: train, synthesize, align, evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus with gold alignments and a matching config.
    Toy(ToyArgs),
    /// Train from flat start, or resume from a checkpoint.
    Train(TrainArgs),
    /// Generate features for a symbol sequence.
    Synth(SynthArgs),
    /// Viterbi-align a manifest and score against gold alignments when present.
    Align(AlignArgs),
    /// Exact log likelihood of every utterance in a manifest.
    Loglik(LoglikArgs),
    /// Print checkpoint contents.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub train: usize,
    #[arg(long, default_value_t = 40)]
    pub valid: usize,
    #[arg(long, default_value_t = 8)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Distinct frame patterns within each symbol (2 gives bimodal symbols).
    #[arg(long, default_value_t = 1)]
    pub segments: usize,
    #[arg(long, default_value_t = 2)]
    pub states_per_symbol: usize,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long)]
    pub min_duration: Option<usize>,
    #[arg(long)]
    pub max_duration: Option<usize>,
    #[arg(long, default_value_t = 0, env = SEED_ENV)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override `max_updates`.
    #[arg(long)]
    pub max_updates: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AcousticArg {
    Mean,
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DurationArg {
    Quantile,
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Space-separated symbols.
    #[arg(long, conflicts_with = "symbols_file", required_unless_present = "symbols_file")]
    pub text: Option<String>,
    /// File holding space-separated symbols.
    #[arg(long)]
    pub symbols_file: Option<PathBuf>,
    /// Output prefix; writes `<prefix>.melbin`, `<prefix>.align`, `<prefix>.rate.txt`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub acoustic_mode: Option<AcousticArg>,
    #[arg(long, value_enum)]
    pub duration_mode: Option<DurationArg>,
    /// Quantile threshold; lower values speak faster.
    #[arg(long)]
    pub q: Option<f64>,
    /// Per-state threshold as STATE=Q (0-based state index); repeatable.
    #[arg(long = "state-q", value_parser = parse_state_q)]
    pub state_q: Vec<(usize, f64)>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Pre-net dropout during generation.
    #[arg(long, value_enum)]
    pub dropout: Option<Toggle>,
}

fn parse_state_q(s: &str) -> std::result::Result<(usize, f64), String> {
    let (a, b) = s.split_once('=').ok_or("expected STATE=Q")?;
    Ok((
        a.trim().parse().map_err(|e| format!("state: {e}"))?,
        b.trim().parse().map_err(|e| format!("q: {e}"))?,
    ))
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for `<id>.align` files and `report.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct LoglikArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Evaluate with pre-net dropout (off by default).
    #[arg(long)]
    pub dropout: bool,
    #[arg(long, default_value_t = 0, env = SEED_ENV)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Toy(a) => cmd_toy(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Align(a) => cmd_align(&a, out),
        Command::Loglik(a) => cmd_loglik(&a, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
    }
}

/// Loads a checkpoint plus the run config stored inside it.
fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String, RunConfig)> {
    let (ck, hash) = Checkpoint::load(path, AdamConfig::default())?;
    let cfg = RunConfig::parse(&ck.run_config, Path::new("."))?;
    Ok((ck, hash, cfg))
}

fn provenance(ck_hash: &str, cfg: &RunConfig) -> String {
    format!("checkpoint={ck_hash}\nconfig_hash={}", cfg.hash())
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn cmd_toy(a: &ToyArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = ToySpec::random(a.vocab_size, a.dim, a.segments, a.seed);
    spec.noise = a.noise;
    if let Some(d) = a.min_duration {
        spec.min_duration = d;
    }
    if let Some(d) = a.max_duration {
        spec.max_duration = d;
    }
    spec.validate(a.states_per_symbol)?;
    let corpus = generate_toy_corpus(&spec, a.train + a.valid)?;
    fs::create_dir_all(a.out.join("feats"))?;
    fs::create_dir_all(a.out.join("gold"))?;
    let vocab = Vocabulary::new((0..a.vocab_size).map(|i| format!("s{i}")).collect())?;
    vocab.save(a.out.join("vocab.txt"))?;
    let mut entries = Vec::new();
    for u in &corpus {
        let feats = format!("feats/{}.melbin", u.id);
        let gold = format!("gold/{}.gold", u.id);
        save_melbin(&u.frames, a.out.join(&feats))?;
        write_gold(a.out.join(&gold), u.gold.as_deref().unwrap_or_default())?;
        entries.push(ManifestEntry {
            id: u.id.clone(),
            symbols: u
                .symbols
                .iter()
                .map(|&s| vocab.symbol(s).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(" "),
            features: feats.into(),
            gold: Some(gold.into()),
        });
    }
    write_manifest(a.out.join("train.tsv"), &entries[..a.train])?;
    write_manifest(a.out.join("valid.tsv"), &entries[a.train..])?;
    let config = format!(
        "# generated by `nhmm toy`\nvocab = vocab.txt\ntrain_manifest = train.tsv\nvalid_manifest = {}\nout_dir = run\n\
         vocab_size = {}\nacoustic_dim = {}\nstates_per_symbol = {}\nseed = {}\n",
        if a.valid > 0 { "valid.tsv" } else { "" },
        a.vocab_size,
        a.dim,
        a.states_per_symbol,
        a.seed
    );
    fs::write(a.out.join("config.txt"), config)?;
    writeln!(
        out,
        "wrote {} training and {} validation utterances to {}",
        a.train,
        a.valid,
        a.out.display()
    )?;
    Ok(())
}

fn load_split(
    manifest: &Path,
    vocab: &Vocabulary,
    k: usize,
    what: &str,
    log: &mut dyn Write,
) -> Result<Vec<Utterance>> {
    let (utts, rejected) = load_corpus(manifest, vocab, k)?;
    for r in &rejected {
        eprintln!("warning: {what} utterance {} rejected: {}", r.id, r.reason);
        writeln!(log, "# rejected {what} {}: {}", r.id, r.reason)?;
    }
    Ok(utts)
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(m) = a.max_updates {
        cfg.max_updates = m;
    }
    let vocab_path = cfg
        .vocab
        .clone()
        .ok_or_else(|| Error::Config("config lacks vocab".into()))?;
    let train_path = cfg
        .train_manifest
        .clone()
        .ok_or_else(|| Error::Config("config lacks train_manifest".into()))?;
    let vocab = Vocabulary::load(&vocab_path)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let log_path = cfg.out_dir.join("train.log");
    let resuming = a.resume.is_some();
    let mut log = fs::OpenOptions::new().create(true).append(true).open(&log_path)?;
    let k = cfg.model.states_per_symbol;
    let mut header = Vec::new();
    let train = load_split(&train_path, &vocab, k, "training", &mut header)?;
    let mut trainer = match &a.resume {
        Some(p) => {
            let (ck, _) = Checkpoint::load(p, cfg.adam.clone())?;
            Trainer::resume(cfg.clone(), ck, train)?
        }
        None => Trainer::new(cfg.clone(), vocab.clone(), train)?,
    };
    let mut valid = match &cfg.valid_manifest {
        Some(p) => load_split(p, &vocab, k, "validation", &mut header)?,
        None => Vec::new(),
    };
    trainer.norm().apply_all(&mut valid)?;

    if resuming {
        writeln!(
            log,
            "# resumed at update {} config_hash={}",
            trainer.update(),
            cfg.hash()
        )?;
    } else {
        writeln!(log, "# config_hash={}", cfg.hash())?;
        writeln!(log, "# init_tau={:?}", trainer.init_tau())?;
    }
    log.write_all(&header)?;
    if !resuming {
        writeln!(log, "{}", LogRecord::TSV_HEADER)?;
    }

    let save = |trainer: &Trainer, name: String, log: &mut fs::File| -> Result<()> {
        let path = cfg.out_dir.join(&name);
        let hash = trainer.checkpoint(true).save(&path)?;
        writeln!(log, "# checkpoint update={} file={name} hash={hash}", trainer.update())?;
        if !valid.is_empty() {
            let r = trainer.evaluate(&valid)?;
            writeln!(
                log,
                "# valid update={} mean_nll={:?} nll_per_frame={:?}",
                trainer.update(),
                r.mean_nll,
                r.nll_per_frame
            )?;
        }
        Ok(())
    };
    if !resuming {
        save(&trainer, format!("ckpt-{:06}.nhmc", 0), &mut log)?;
    }
    let mut last_saved = trainer.update();
    while trainer.update() < cfg.max_updates {
        match trainer.step() {
            Ok(rec) => {
                writeln!(log, "{}", rec.to_tsv())?;
                let u = trainer.update();
                if cfg.checkpoint_interval > 0 && u % cfg.checkpoint_interval == 0 {
                    save(&trainer, format!("ckpt-{u:06}.nhmc"), &mut log)?;
                    last_saved = u;
                }
            }
            Err(e @ Error::Numerical(_)) => {
                let name = format!("diagnostic-{:06}.nhmc", trainer.update());
                trainer.checkpoint(true).save(cfg.out_dir.join(&name))?;
                writeln!(log, "# aborted at update {}: {e}; wrote {name}", trainer.update() + 1)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        }
    }
    if last_saved != trainer.update() {
        save(&trainer, format!("ckpt-{:06}.nhmc", trainer.update()), &mut log)?;
    }
    writeln!(
        out,
        "trained to update {}; log at {}",
        trainer.update(),
        log_path.display()
    )?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let text = match (&a.text, &a.symbols_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p)?,
        (None, None) => return Err(Error::Config("give --text or --symbols-file".into())),
    };
    if text.split_whitespace().next().is_none() {
        return Err(Error::Config("empty symbol sequence".into()));
    }
    let (ck, hash, cfg) = load_checkpoint(&a.checkpoint)?;
    let symbols = ck.vocab.encode(&text)?;
    let mut opts = cfg.synthesis_options(a.seed.unwrap_or(cfg.seed));
    if let Some(m) = a.acoustic_mode {
        opts.acoustic = match m {
            AcousticArg::Mean => AcousticMode::Mean,
            AcousticArg::Sampled => AcousticMode::Sampled,
        };
    }
    if let Some(m) = a.duration_mode {
        opts.duration = match m {
            DurationArg::Quantile => DurationMode::Quantile,
            DurationArg::Sampled => DurationMode::Sampled,
        };
    }
    if let Some(q) = a.q {
        opts.quantile = q;
    }
    opts.state_quantiles = a.state_q.iter().copied().collect::<BTreeMap<_, _>>();
    if a.max_frames.is_some() {
        opts.max_frames = a.max_frames;
    }
    if let Some(t) = a.dropout {
        opts.dropout = matches!(t, Toggle::On);
    }

    let result = synthesize(&ck.model, &symbols, &opts)?;
    let k = ck.model.config().states_per_symbol;
    let frames = ck.norm.invert(&result.frames)?;
    let prefix = a.out.display().to_string();
    let prov = provenance(&hash, &cfg);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_melbin(&frames, format!("{prefix}.melbin"))?;
    let mut f = create_file(Path::new(&format!("{prefix}.align")))?;
    write_alignment(&mut f, &result.alignment, k, Some(&prov))?;
    f.flush()?;
    let report = rate_report(&result, k)?;
    let extra = [
        ("checkpoint", hash.clone()),
        ("config_hash", cfg.hash()),
        ("acoustic_mode", config::acoustic_name(opts.acoustic).to_string()),
        ("duration_mode", config::duration_name(opts.duration).to_string()),
        ("q", format!("{:?}", opts.quantile)),
        ("seed", opts.seed.to_string()),
        ("dropout", opts.dropout.to_string()),
    ];
    fs::write(format!("{prefix}.rate.txt"), report.to_text(&extra))?;
    writeln!(
        out,
        "{} frames, {} ({prefix}.melbin)",
        report.total_frames,
        report.termination.as_str()
    )?;
    Ok(())
}

fn cmd_align(a: &AlignArgs, out: &mut dyn Write) -> Result<()> {
    let (ck, hash, cfg) = load_checkpoint(&a.checkpoint)?;
    let k = ck.model.config().states_per_symbol;
    let (mut utts, rejected) = load_corpus(&a.manifest, &ck.vocab, k)?;
    ck.norm.apply_all(&mut utts)?;
    fs::create_dir_all(&a.out_dir)?;
    let prov = provenance(&hash, &cfg);
    let (mut correct, mut gold_frames, mut f1_sum, mut scored) = (0.0, 0usize, 0.0, 0usize);
    for u in &utts {
        let lat = model_lattice(&ck.model, &u.symbols, &u.frames)?;
        let (path, score) = viterbi(&lat)?;
        let mut f = create_file(&a.out_dir.join(format!("{}.align", u.id)))?;
        write_alignment(
            &mut f,
            &path,
            k,
            Some(&format!("{prov}\nutterance={}\nlog_prob={score:?}", u.id)),
        )?;
        f.flush()?;
        if let Some(gold) = &u.gold {
            let s = alignment_accuracy(&path, gold, k)?;
            correct += s.frame_accuracy * gold.len() as f64;
            gold_frames += gold.len();
            f1_sum += s.boundary_f1;
            scored += 1;
        }
    }
    let mut report = format!("{prov}\naligned={}\nskipped={}\n", utts.len(), rejected.len());
    for r in &rejected {
        report.push_str(&format!("skipped_item={}\t{}\n", r.id, r.reason));
    }
    if scored > 0 {
        report.push_str(&format!(
            "scored={scored}\nframe_accuracy={:.6}\nboundary_f1={:.6}\n",
            correct / gold_frames as f64,
            f1_sum / scored as f64
        ));
    } else {
        report.push_str("gold=absent\n");
    }
    fs::write(a.out_dir.join("report.txt"), &report)?;
    out.write_all(report.as_bytes())?;
    Ok(())
}

fn cmd_loglik(a: &LoglikArgs, out: &mut dyn Write) -> Result<()> {
    let (ck, hash, cfg) = load_checkpoint(&a.checkpoint)?;
    let k = ck.model.config().states_per_symbol;
    let (mut utts, rejected) = load_corpus(&a.manifest, &ck.vocab, k)?;
    if utts.is_empty() {
        return Err(Error::Input("no feasible utterances in manifest".into()));
    }
    ck.norm.apply_all(&mut utts)?;
    let report = evaluate(&ck.model, &utts, a.dropout, a.seed)?;
    let mut text = String::new();
    for line in provenance(&hash, &cfg).lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(&format!("# dropout={}\n", a.dropout));
    for r in &rejected {
        text.push_str(&format!("# skipped {}: {}\n", r.id, r.reason));
    }
    text.push_str("id\tloglik\tframes\tloglik_per_frame\n");
    for (u, ll) in utts.iter().zip(&report.logliks) {
        text.push_str(&format!(
            "{}\t{ll:?}\t{}\t{:?}\n",
            u.id,
            u.num_frames(),
            ll / u.num_frames() as f64
        ));
    }
    let total: f64 = report.logliks.iter().sum();
    text.push_str(&format!(
        "# total_loglik={total:?}\n# mean_nll={:?}\n# nll_per_frame={:?}\n# utterances={}\n# frames={}\n",
        report.mean_nll, report.nll_per_frame, report.items, report.frames
    ));
    match &a.out {
        Some(p) => {
            let mut f = create_file(p)?;
            f.write_all(text.as_bytes())?;
            f.flush()?;
            writeln!(out, "mean_nll={:?} over {} utterances", report.mean_nll, report.items)?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let (ck, hash, cfg) = load_checkpoint(&a.checkpoint)?;
    writeln!(out, "{}", provenance(&hash, &cfg))?;
    writeln!(out, "update={}", ck.update)?;
    writeln!(out, "init_tau={:?}", ck.init_tau)?;
    writeln!(out, "optimizer_state={}", ck.adam.is_some())?;
    for (k, v) in ck.model.config().to_pairs() {
        writeln!(out, "model.{k}={v}")?;
    }
    writeln!(out, "norm.mean={}", kv::join(&ck.norm.mean))?;
    writeln!(out, "norm.std={}", kv::join(&ck.norm.std))?;
    let count = ck.model.param_count();
    for (name, n) in &count.per_tensor {
        writeln!(out, "params.{name}={n}")?;
    }
    writeln!(out, "params.total={}", count.total)?;
    Ok(())
}
