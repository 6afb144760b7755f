//! Offline pipeline front end: ingest a tokenized corpus, group it into
//! fixed-length sequences, report on the result, benchmark the packers,
//! and evaluate the truncation toy process.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqpack::corpus::{load_corpus, Corpus, IngestMode, Sentinel};
use seqpack::packer::{pack_concat, pack_corpus};
use seqpack::plan::{materialize, Method, PackingPlan};
use seqpack::stats::{bench_scaling, compactness, truncations};
use seqpack::synth::SyntheticSpec;
use seqpack::toyproc::{ToyProcess, MAX_EXACT_M};
use seqpack::Error;

#[derive(Parser)]
#[command(name = "seqpack", version, about = "Pack tokenized documents into fixed-length training sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk a corpus and pack the chunks into sequences; writes the plan
    /// and its reports.
    Pack(PackArgs),
    /// Concatenate-then-split baseline; writes the plan and its reports.
    Concat(ConcatArgs),
    /// Resolve a plan against a token-ids corpus into binary rows of
    /// max-seq-len little-endian u32 tokens.
    Materialize(MaterializeArgs),
    /// Recompute reports from an existing plan file.
    Stats(StatsArgs),
    /// Time the optimized and baseline packers over synthetic corpora.
    Bench(BenchArgs),
    /// Emit the truncated-model loss curves as CSV.
    Toy(ToyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    LengthsOnly,
    TokenIds,
}

impl From<ModeArg> for IngestMode {
    fn from(mode: ModeArg) -> IngestMode {
        match mode {
            ModeArg::LengthsOnly => IngestMode::LengthsOnly,
            ModeArg::TokenIds => IngestMode::TokenIds,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Line-delimited corpus records.
    input: PathBuf,
    /// Training sequence length L.
    #[arg(long)]
    max_seq_len: u32,
    /// Record interpretation.
    #[arg(long, value_enum, default_value = "lengths-only")]
    mode: ModeArg,
    /// Append one end-of-document token per document, optionally with an
    /// explicit token id (default 0).
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "0")]
    sentinel: Option<u32>,
}

impl CorpusArgs {
    fn sentinel(&self) -> Sentinel {
        match self.sentinel {
            None => Sentinel::Off,
            Some(token_id) => Sentinel::Append { token_id },
        }
    }

    fn load(&self) -> seqpack::Result<Corpus> {
        load_corpus(
            &self.input,
            self.mode.into(),
            self.max_seq_len,
            self.sentinel(),
        )
    }
}

#[derive(Args)]
struct PackArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Grouping strategy.
    #[arg(long, default_value = "bfd", value_parser = Method::from_str)]
    method: Method,
    /// Drop the final partial sequence instead of padding it (concat
    /// only).
    #[arg(long)]
    drop_remainder: bool,
    /// Output directory for plan.jsonl and reports.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConcatArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    drop_remainder: bool,
    /// Output directory for plan.jsonl and reports.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaterializeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Plan file produced by pack or concat.
    #[arg(long)]
    plan: PathBuf,
    /// Method the plan was produced with.
    #[arg(long, default_value = "bfd", value_parser = Method::from_str)]
    method: Method,
    /// Token id used to fill sequence tails.
    #[arg(long, default_value_t = 0)]
    pad_id: u32,
    /// Output file of fixed-length binary rows.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Plan file produced by pack or concat.
    #[arg(long)]
    plan: PathBuf,
    /// Method the plan was produced with.
    #[arg(long, value_parser = Method::from_str)]
    method: Method,
    /// Output directory for the recomputed reports.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Corpus sizes (document counts), ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u64>,
    #[arg(long, default_value_t = 2048)]
    max_seq_len: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timing repetitions per size; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    reps: u32,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    /// Agreement probabilities to evaluate.
    #[arg(long, value_delimiter = ',', required = true)]
    p_grid: Vec<f64>,
    /// Evaluate token positions 1..=m-max.
    #[arg(long, default_value_t = 200)]
    m_max: u32,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::PlanMismatch(_) => 3,
        Error::Capacity(_) => 4,
        Error::Io { .. } => 1,
    }
}

fn run(command: Command) -> seqpack::Result<()> {
    match command {
        Command::Pack(args) => {
            let corpus = args.corpus.load()?;
            group_and_report(&corpus, args.method, args.drop_remainder, &args.out)
        }
        Command::Concat(args) => {
            let corpus = args.corpus.load()?;
            group_and_report(&corpus, Method::Concat, args.drop_remainder, &args.out)
        }
        Command::Materialize(args) => run_materialize(args),
        Command::Stats(args) => run_stats(args),
        Command::Bench(args) => run_bench(args),
        Command::Toy(args) => run_toy(args),
    }
}

fn group_and_report(
    corpus: &Corpus,
    method: Method,
    drop_remainder: bool,
    out_dir: &Path,
) -> seqpack::Result<()> {
    let plan = pack_corpus(method, corpus, drop_remainder)?;
    let concat_ref = method
        .is_packing()
        .then(|| pack_concat(corpus, false));
    write_reports(corpus, &plan, concat_ref.as_ref(), out_dir, true)?;
    Ok(())
}

fn write_reports(
    corpus: &Corpus,
    plan: &PackingPlan,
    concat_ref: Option<&PackingPlan>,
    out_dir: &Path,
    include_plan: bool,
) -> seqpack::Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let compact = compactness(plan, concat_ref)?;
    let truncation = truncations(plan, corpus)?;

    if include_plan {
        write_atomic(&out_dir.join("plan.jsonl"), |w| plan.write_jsonl(corpus, w))?;
    }
    write_atomic(&out_dir.join("compactness.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &compact)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        w.write_all(b"\n").map_err(|e| Error::io("compactness.json", e))
    })?;
    write_atomic(&out_dir.join("truncation.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &truncation)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        w.write_all(b"\n").map_err(|e| Error::io("truncation.json", e))
    })?;
    write_atomic(&out_dir.join("truncation.csv"), |w| {
        truncation
            .write_csv(w)
            .map_err(|e| Error::io("truncation.csv", e))
    })?;

    print!("{}", compact.render_text());
    print!("{}", truncation.render_text());
    if include_plan {
        println!(
            "wrote plan with {} sequences to {}",
            plan.num_sequences(),
            out_dir.join("plan.jsonl").display()
        );
    }
    Ok(())
}

fn read_plan(args_plan: &Path, corpus: &Corpus, method: Method) -> seqpack::Result<PackingPlan> {
    let file = fs::File::open(args_plan).map_err(|e| Error::io(args_plan, e))?;
    PackingPlan::read_jsonl(
        BufReader::new(file),
        &args_plan.display().to_string(),
        corpus,
        method,
    )
}

fn run_materialize(args: MaterializeArgs) -> seqpack::Result<()> {
    if !matches!(args.corpus.mode, ModeArg::TokenIds) {
        return Err(Error::Config(
            "materialize requires --mode token-ids".into(),
        ));
    }
    let corpus = args.corpus.load()?;
    let plan = read_plan(&args.plan, &corpus, args.method)?;
    write_atomic(&args.out, |w| materialize(&plan, &corpus, args.pad_id, w))?;
    println!(
        "materialized {} sequences of {} tokens to {}",
        plan.num_sequences(),
        corpus.max_seq_len(),
        args.out.display()
    );
    Ok(())
}

fn run_stats(args: StatsArgs) -> seqpack::Result<()> {
    let corpus = args.corpus.load()?;
    let plan = read_plan(&args.plan, &corpus, args.method)?;
    let concat_ref = args
        .method
        .is_packing()
        .then(|| pack_concat(&corpus, false));
    write_reports(&corpus, &plan, concat_ref.as_ref(), &args.out, false)
}

fn run_bench(args: BenchArgs) -> seqpack::Result<()> {
    let spec = SyntheticSpec::new(args.seed, args.max_seq_len);
    let report = bench_scaling(&spec, &args.sizes, args.reps)?;
    print!("{}", report.render_text());
    if let Some(path) = &args.out {
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &report)
                .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))
        })?;
    }
    Ok(())
}

fn run_toy(args: ToyArgs) -> seqpack::Result<()> {
    if args.m_max == 0 || args.m_max > MAX_EXACT_M {
        return Err(Error::Config(format!(
            "--m-max must be in 1..={MAX_EXACT_M}"
        )));
    }
    let write_rows = |w: &mut dyn Write| -> seqpack::Result<()> {
        let io_err = |e| Error::io("<toy output>", e);
        writeln!(w, "p,m,loss_a,loss_b,relative_increase").map_err(io_err)?;
        for &p in &args.p_grid {
            let toy = ToyProcess::new(p)?;
            let loss_a = toy.model_a_loss();
            for m in 1..=args.m_max {
                let loss_b = toy.model_b_expected_loss(m)?;
                let relative = toy.relative_increase(m)?;
                writeln!(w, "{p},{m},{loss_a},{loss_b},{relative}").map_err(io_err)?;
            }
        }
        Ok(())
    };
    match &args.out {
        Some(path) => write_atomic(path, |w| write_rows(w)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = BufWriter::new(stdout.lock());
            write_rows(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Writes through a temp file in the target directory and renames into
/// place, so failed runs leave no partial artifact behind.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> seqpack::Result<()>,
) -> seqpack::Result<()> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut writer = BufWriter::new(tmp.as_file_mut());
        fill(&mut writer)?;
        writer.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
