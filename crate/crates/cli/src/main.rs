use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use namecf::cooccur::{build_bag, BagFile, BagSpec, PopularityMeasure};
use namecf::ensemble::{evaluate_tree, EnsembleSpec, DEFAULT_TREE};
use namecf::eval::DEFAULT_CUTOFF;
use namecf::experiment::{evaluate_run_file, read_split_file, read_user_list, run_experiment, ExperimentConfig};
use namecf::ingest::{
    compute_stats, parse_activity_log, preprocess, split_validation, write_histogram, ColumnMap, Corpus, KnownNames,
    PreprocessSummary, SplitMode,
};
use namecf::models::{read_model_file, run_model, ModelParams, ModelSpec};
use namecf::runs::{RunStore, RUN_EXTENSION};
use namecf::synth::{generate_synthetic, SynthParams};
use namecf::{ActivityFilter, UserId};

#[derive(Parser)]
#[command(name = "namecf", version, about = "Top-N given-name recommendation pipeline")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "NAMECF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and filter a raw activity log into a corpus file.
    Ingest(IngestArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Hold out the last two names of each user.
    Split(SplitArgs),
    /// Build a co-occurrence bag.
    Bag(BagArgs),
    /// Produce a run for one model.
    Recommend(RecommendArgs),
    /// Fuse model runs with an ensemble tree.
    Ensemble(EnsembleArgs),
    /// Score a run with MAP@k.
    Evaluate(EvaluateArgs),
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Generate a synthetic log with planted clusters.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    log: PathBuf,
    /// File with one known name per line.
    #[arg(long)]
    known: PathBuf,
    /// Column order, e.g. "user,activity,name,timestamp".
    #[arg(long)]
    columns: Option<ColumnMap>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for the two histogram files.
    #[arg(long)]
    hist_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Relaxed mode: split only the users listed in this file, using any activity.
    #[arg(long)]
    users: Option<PathBuf>,
    /// Held-out names.
    #[arg(long)]
    targets: PathBuf,
    /// Training corpus.
    #[arg(long)]
    train: PathBuf,
}

#[derive(Args)]
struct BagArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Activities that count, e.g. "ES,LS,ND" or "ALL".
    #[arg(long, default_value = "ES,LS,ND")]
    activities: ActivityFilter,
    /// Drop the k most popular names first.
    #[arg(long, default_value_t = 0)]
    exclude_top: usize,
    /// Rank popularity by raw interactions instead of distinct users.
    #[arg(long)]
    by_interactions: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Preset id (m0..m8, pop) or an id defined in --models.
    #[arg(long)]
    model: String,
    /// TOML file with `[[models]]` tables.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Precomputed bag; built from the corpus when absent.
    #[arg(long)]
    bag: Option<PathBuf>,
    /// Neighbourhood size for the user-based models.
    #[arg(long, short)]
    k: Option<usize>,
    #[command(flatten)]
    select: UserSelection,
    #[arg(long, short, default_value_t = DEFAULT_CUTOFF)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Runs directory; the run is written to `<out>/<model>.run`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct UserSelection {
    /// Recommend for the users of this split file.
    #[arg(long, conflicts_with = "users")]
    split: Option<PathBuf>,
    /// `all`, or a file listing one user per line.
    #[arg(long, default_value = "all")]
    users: String,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Directory of model runs (`<model>.run`).
    #[arg(long)]
    runs: PathBuf,
    /// Ensemble definition; the built-in tree when absent.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Node to evaluate; the root when absent.
    #[arg(long)]
    node: Option<String>,
    #[command(flatten)]
    select: UserSelection,
    #[arg(long, short, default_value_t = DEFAULT_CUTOFF)]
    n: usize,
    /// Runs directory; the result is written to `<out>/<node>.run`.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write a submission file without scores.
    #[arg(long)]
    submission: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// A run file, or a directory whose `.run` files are all evaluated.
    #[arg(long, alias = "run")]
    runs: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, short, default_value_t = DEFAULT_CUTOFF)]
    k: usize,
    /// Per-user AP report; a directory of `<model>.tsv` reports when
    /// `--runs` is a directory.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 100)]
    names: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for `log.tsv` and `known.txt`.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 for a failed experiment stage, 1 for invalid configuration, 2 for
/// everything else (unreadable or malformed data).
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<namecf::Error>() {
        Some(namecf::Error::Stage { .. }) => 3,
        Some(namecf::Error::Config(_)) | Some(namecf::Error::UnknownLeaf(_)) | Some(namecf::Error::UnknownNode(_)) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if let Command::Run(args) = &cli.command {
        return run(args, cli.threads);
    }
    if let Some(threads) = cli.threads {
        rayon_global(threads)?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Bag(a) => bag(a),
        Command::Recommend(a) => recommend(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Run(_) => unreachable!("handled above"),
    }
}

fn rayon_global(threads: usize) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn read_corpus(path: &Path) -> anyhow::Result<Corpus> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Corpus::read(BufReader::new(file)).with_context(|| format!("reading corpus {}", path.display()))
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let parsed = parse_activity_log(&a.log, &a.columns.unwrap_or_default())?;
    for reject in parsed.rejects.iter().take(10) {
        log::warn!("line {}: {}", reject.line, reject.reason);
    }
    if parsed.rejects.len() > 10 {
        log::warn!("{} more malformed rows", parsed.rejects.len() - 10);
    }
    let corpus = preprocess(&parsed.interactions, &KnownNames::read(&a.known)?);
    corpus.write(create(&a.out)?)?;
    let s = PreprocessSummary::new(parsed.interactions.len(), &corpus);
    println!(
        "rows {} -> {}; users {}, names {}, user-name pairs {}",
        s.input_rows, s.retained_rows, s.users, s.names, s.pairs
    );
    Ok(())
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let report = compute_stats(&read_corpus(&a.corpus)?)?;
    print!("{report}");
    if let Some(dir) = a.hist_dir {
        fs::create_dir_all(&dir)?;
        write_histogram(create(&dir.join("names_per_user.tsv"))?, &report.names_per_user)?;
        write_histogram(create(&dir.join("users_per_name.tsv"))?, &report.users_per_name)?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mode = match &a.users {
        Some(path) => SplitMode::Relaxed(read_user_list(path)?),
        None => SplitMode::Strict,
    };
    let split = split_validation(&corpus, &mode);
    for user in &split.skipped {
        log::warn!("user `{user}` has fewer than two distinct names; skipped");
    }
    split.write_targets(create(&a.targets)?)?;
    split.train.write(create(&a.train)?)?;
    println!("{} users held out", split.targets.len());
    Ok(())
}

fn bag(a: BagArgs) -> anyhow::Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mut spec = BagSpec::new(a.activities, a.exclude_top);
    if a.by_interactions {
        spec.popularity = PopularityMeasure::Interactions;
    }
    let bag = build_bag(&corpus, &spec)?;
    bag.write(corpus.name_vocab(), create(&a.out)?)?;
    println!("{} co-occurring pairs", bag.pairs().len());
    Ok(())
}

fn selected_users(sel: &UserSelection) -> anyhow::Result<Option<Vec<String>>> {
    Ok(match (&sel.split, sel.users.as_str()) {
        (Some(split), _) => Some(read_split_file(split)?.into_keys().collect()),
        (None, "all") => None,
        (None, list) => Some(read_user_list(Path::new(list))?.into_iter().collect()),
    })
}

fn find_model(id: &str, file: Option<&Path>) -> anyhow::Result<ModelSpec> {
    if let Some(path) = file {
        if let Some(m) = read_model_file(path)?.into_iter().find(|m| m.id == id) {
            return Ok(m);
        }
    }
    ModelSpec::preset(id).ok_or_else(|| namecf::Error::Config(format!("unknown model `{id}`")).into())
}

fn recommend(a: RecommendArgs) -> anyhow::Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mut spec = find_model(&a.model, a.models.as_deref())?;
    if let (Some(k), ModelParams::UserBased { neighbours, .. }) = (a.k, &mut spec.params) {
        *neighbours = k;
    }
    let users: Vec<UserId> = match selected_users(&a.select)? {
        Some(names) => names
            .iter()
            .filter_map(|u| {
                let id = corpus.user_vocab().user_id(u);
                if id.is_none() {
                    log::warn!("user `{u}` is not in the corpus");
                }
                id
            })
            .collect(),
        None => corpus.histories().map(|h| h.user).collect(),
    };
    let bag = match (spec.params.bag_spec(), &a.bag) {
        (None, _) => None,
        (Some(_), Some(path)) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let bag = BagFile::read(BufReader::new(file))?.into_bag(corpus.name_vocab())?;
            Some(bag)
        }
        (Some(bag_spec), None) => Some(build_bag(&corpus, &bag_spec)?),
    };
    if let (Some(expected), Some(bag)) = (spec.params.bag_spec(), &bag) {
        if bag.spec() != &expected {
            log::warn!("bag was built with `{}`, model expects `{expected}`", bag.spec());
        }
    }
    info!("{}: {} users", spec.id, users.len());
    let run = run_model(&spec, &corpus, &users, bag.as_ref(), a.n, a.seed)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    run.write(
        corpus.name_vocab(),
        create(&a.out.join(format!("{}.{RUN_EXTENSION}", spec.id)))?,
    )?;
    Ok(())
}

fn ensemble(a: EnsembleArgs) -> anyhow::Result<()> {
    let text = match &a.tree {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => DEFAULT_TREE.to_owned(),
    };
    let spec = EnsembleSpec::parse(&text)?;
    let node = match &a.node {
        Some(name) => spec.node(name)?,
        None => spec.root()?,
    };
    let store = RunStore::load_dir(&a.runs, [])?;
    let users = match selected_users(&a.select)? {
        Some(users) => users,
        None => store.users(),
    };
    let run = evaluate_tree(&node, &store, &users, a.n)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    run.write(
        store.names(),
        create(&a.out.join(format!("{}.{RUN_EXTENSION}", node.label())))?,
    )?;
    if let Some(path) = &a.submission {
        run.write_submission(store.names(), a.n, create(path)?)?;
    }
    println!("{} lists written for node `{}`", run.lists.len(), node.label());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let targets = read_split_file(&a.split)?;
    if !a.runs.is_dir() {
        let result = evaluate_run_file(&a.runs, &targets, a.k)?;
        if let Some(path) = &a.report {
            result.write_report(create(path)?)?;
        }
        println!("MAP@{}\t{:.6}", a.k, result.map_at_k);
        return Ok(());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(&a.runs).with_context(|| format!("reading {}", a.runs.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == RUN_EXTENSION) {
            files.push(path);
        }
    }
    files.sort();
    if let Some(dir) = &a.report {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    println!("model\tMAP@{}", a.k);
    for path in files {
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let result = evaluate_run_file(&path, &targets, a.k)?;
        if let Some(dir) = &a.report {
            result.write_report(create(&dir.join(format!("{id}.tsv")))?)?;
        }
        println!("{id}\t{:.6}", result.map_at_k);
    }
    Ok(())
}

fn run(a: &RunArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(&a.config)?;
    let report = run_experiment(&config, threads)?;
    print!("{report}");
    println!("artifacts in {}", report.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let data = generate_synthetic(&SynthParams {
        clusters: a.clusters,
        users: a.users,
        names: a.names,
        noise: a.noise,
        seed: a.seed,
    })?;
    let (log, known) = data.write_to_dir(&a.out)?;
    println!("wrote {} and {}", log.display(), known.display());
    Ok(())
}
