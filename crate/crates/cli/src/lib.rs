//! Command implementations for the `lexstress` binary.
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input and
//! configuration, 3 when records do not match the mask plans (reports are
//! still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lexstress_core::lexicon::build_lexicon;
use lexstress_core::pipeline::{self, read_text, Inputs};
use lexstress_core::report::{census_markdown, comparisons_markdown, render};
use lexstress_core::{BandingMode, EvalOptions, Format, MatchBase, ReportBundle, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FINDINGS: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lexstress",
    version,
    about = "Stress-test masked-word predictions against a frequency lexicon"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lexicon maintenance.
    Lexicon {
        #[command(subcommand)]
        action: LexiconCommand,
    },
    /// Validate records, compute every table and write all report formats.
    Evaluate(RunArgs),
    /// Print the per-pair structure comparison tables.
    Compare(RunArgs),
    /// Print the case census of missed words.
    Oov(RunArgs),
    /// Re-render a JSON report in another format.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Clean and rank a raw `surface<TAB>count` list into a snapshot.
    Build(LexiconBuildArgs),
}

#[derive(Debug, Args)]
pub struct LexiconBuildArgs {
    /// Raw frequency list.
    pub input: PathBuf,
    /// Snapshot output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "LEXSTRESS_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub banding_mode: Option<BandingMode>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, env = "LEXSTRESS_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub pos_lookup: Option<PathBuf>,
    #[arg(long)]
    pub reference_totals: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k_limit: Option<usize>,
    #[arg(long)]
    pub policy: Option<MatchBase>,
    #[arg(long)]
    pub best_threshold: Option<f64>,
    #[arg(long)]
    pub banding_mode: Option<BandingMode>,
    /// Analysis worker threads (0 picks automatically).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `evaluate`.
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Directory to write into; required for CSV, which spans several files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::from_toml(&text, base).with_context(|| format!("{}: invalid config", path.display()))
}

impl RunArgs {
    /// The config file, if any, with flag values layered on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        let paths = [
            (&mut cfg.lexicon, &self.lexicon),
            (&mut cfg.corpus, &self.corpus),
            (&mut cfg.records, &self.records),
            (&mut cfg.pos_lookup, &self.pos_lookup),
            (&mut cfg.reference_totals, &self.reference_totals),
            (&mut cfg.out, &self.out),
        ];
        for (slot, flag) in paths {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if self.k_limit.is_some() {
            cfg.k_limit = self.k_limit;
        }
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if let Some(t) = self.best_threshold {
            cfg.best_threshold = t;
        }
        if let Some(m) = self.banding_mode {
            cfg.thresholds.banding_mode = m;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("lexstress-report"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn findings_code(bundle: &ReportBundle, err: &mut dyn Write) -> Result<i32> {
    let v = &bundle.validation;
    if v.is_clean() {
        return Ok(EXIT_OK);
    }
    writeln!(
        err,
        "validation: {} missing, {} spurious, {} gold mismatches",
        v.missing.len(),
        v.spurious.len(),
        v.gold_mismatches.len()
    )?;
    Ok(EXIT_FINDINGS)
}

fn run_pipeline(cfg: &RunConfig) -> Result<(Inputs, ReportBundle)> {
    let inputs = Inputs::load(cfg)?;
    let (_, bundle) = pipeline::run(&inputs, &EvalOptions::from_config(cfg))?;
    Ok((inputs, bundle))
}

pub fn cmd_lexicon_build(args: &LexiconBuildArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(m) = args.banding_mode {
        cfg.thresholds.banding_mode = m;
    }
    let text = read_text(&args.input)?;
    let lexicon = build_lexicon(text.lines(), &cfg.thresholds).with_context(|| args.input.display().to_string())?;
    write_file(&args.out, lexicon.to_snapshot().as_bytes())?;
    writeln!(out, "entries: {}, dropped: {}", lexicon.len(), lexicon.dropped())?;
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = args.resolve()?;
    let (_, bundle) = run_pipeline(&cfg)?;
    let dir = out_dir(&cfg)?;
    for format in [Format::Markdown, Format::Json, Format::Csv] {
        for doc in render(&bundle, format)? {
            write_file(&dir.join(&doc.name), &doc.bytes)?;
        }
    }
    if let Some(a) = &bundle.accuracy {
        writeln!(
            out,
            "masks: {}, recognized: {} ({:.2}%), within {}: {} ({:.2}%), first 3: {} ({:.2}%)",
            a.n_masks,
            a.recognized,
            a.accuracy_pct,
            a.k_limit,
            a.recognized_at_limit,
            a.accuracy_at_limit_pct,
            a.recognized_in_first_3,
            a.accuracy_first_3_pct
        )?;
    }
    writeln!(out, "report written to {}", dir.display())?;
    findings_code(&bundle, err)
}

pub fn cmd_compare(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = args.resolve()?;
    let inputs = Inputs::load(&cfg)?;
    if let Some(s) = inputs
        .corpus
        .sentences()
        .iter()
        .find(|s| inputs.corpus.pair_of(&s.id).is_err())
    {
        bail!("sentence {} is not part of any pair", s.id);
    }
    let (_, bundle) = pipeline::run(&inputs, &EvalOptions::from_config(&cfg))?;
    let md = comparisons_markdown(&bundle.comparisons);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("compare.md"), md.as_bytes())?;
    }
    out.write_all(md.as_bytes())?;
    findings_code(&bundle, err)
}

pub fn cmd_oov(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = args.resolve()?;
    let (_, bundle) = run_pipeline(&cfg)?;
    let md = census_markdown(&bundle.oov_census);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("oov_census.md"), md.as_bytes())?;
    }
    out.write_all(md.as_bytes())?;
    findings_code(&bundle, err)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32> {
    let format: Format = args.format.parse()?;
    let bundle = ReportBundle::from_json(&read_text(&args.from)?)?;
    let docs = render(&bundle, format)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for d in docs {
                write_file(&dir.join(&d.name), &d.bytes)?;
            }
        }
        None if format == Format::Csv => bail!("CSV output spans several files; pass --out"),
        None => {
            for d in docs {
                out.write_all(&d.bytes)?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Lexicon {
            action: LexiconCommand::Build(a),
        } => cmd_lexicon_build(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out, err),
        Command::Compare(a) => cmd_compare(a, out, err),
        Command::Oov(a) => cmd_oov(a, out, err),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_INPUT;
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
    }
}
