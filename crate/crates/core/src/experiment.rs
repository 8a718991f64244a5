//! End-to-end experiments driven by one TOML config.
//!
//! ```toml
//! seed = 42
//! out = "results"
//!
//! [data]
//! log = "log.tsv"
//! known = "known.txt"
//!
//! [split]
//! mode = "strict"
//! ```
//!
//! Without a `[[models]]` table the presets `m0`..`m8` and the popularity
//! baseline are run; without `ensemble` the built-in tree is used. Relative
//! paths are resolved against the config file's directory.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.toml            resolved config
//! corpus.tsv             preprocessed corpus
//! stats.txt              corpus statistics (+ two histogram files)
//! split.tsv train.tsv    held-out names and the training corpus
//! bags/*.bag             co-occurrence bags
//! runs/*.run             one run per model
//! ensemble/*.run         one run per inner ensemble node
//! eval/*.tsv             per-user AP of every run
//! submission.tsv         final ensemble lists without scores
//! report.tsv             model, description, MAP@k
//! ```
//!
//! Bags and model runs carry a `.key` sidecar holding a SHA-256 over their
//! inputs; a rerun with an unchanged key reuses the file.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cooccur::{build_bag, BagFile, BagSpec, CooccurrenceBag};
use crate::ensemble::{evaluate_tree, EnsembleSpec, DEFAULT_TREE};
use crate::error::{Error, Result, StageContext};
use crate::eval::{map_at_k, EvalResult, DEFAULT_CUTOFF};
use crate::ingest::{
    compute_stats, parse_activity_log, preprocess, read_targets, split_validation, write_histogram, ColumnMap, Corpus,
    KnownNames, PreprocessSummary, SplitMode, Targets,
};
use crate::models::{run_model, ModelSpec};
use crate::runs::{RunStore, RUN_EXTENSION};
use crate::types::{NameId, UserId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Length of every recommendation list.
    #[serde(default = "default_cutoff")]
    pub n: usize,
    /// MAP cutoff.
    #[serde(default = "default_cutoff")]
    pub k: usize,
    pub out: PathBuf,
    /// Ensemble definition file; the built-in tree when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "ModelSpec::defaults")]
    pub models: Vec<ModelSpec>,
}

fn default_seed() -> u64 {
    42
}
fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

/// Either a raw log plus known-name list, or an already preprocessed corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known: Option<PathBuf>,
    /// Column order of the log, e.g. `"user,activity,name,timestamp"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitConfig {
    #[default]
    Strict,
    /// `users` lists one evaluated user per line.
    Relaxed { users: PathBuf },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("bad experiment config: {e}")))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        for p in [
            &mut self.ensemble,
            &mut self.data.log,
            &mut self.data.known,
            &mut self.data.corpus,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let SplitConfig::Relaxed { users } = &mut self.split {
            fix(users);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialise config: {e}")))
    }

    /// Parses the ensemble tree and checks it against the model list.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let text = match &self.ensemble {
            Some(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
            None => DEFAULT_TREE.to_owned(),
        };
        let spec = EnsembleSpec::parse(&text)?;
        let ids: BTreeSet<&str> = self.models.iter().map(|m| m.id.as_str()).collect();
        if let Some(missing) = spec.root()?.leaves().into_iter().find(|l| !ids.contains(l.as_str())) {
            return Err(Error::UnknownLeaf(missing));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<EnsembleSpec> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::config("n and k must be at least 1"));
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if m.id.is_empty() || m.id.contains(['/', '\\', '.']) {
                return Err(Error::config(format!("model id `{}` is not a plain file stem", m.id)));
            }
            if !seen.insert(m.id.as_str()) {
                return Err(Error::config(format!("model id `{}` is defined twice", m.id)));
            }
        }
        match (&self.data.corpus, &self.data.log, &self.data.known) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => return Err(Error::config("data needs either `corpus` or both `log` and `known`")),
        }
        self.ensemble_spec()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub description: String,
    pub map: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// Models in config order, then ensemble nodes with the root last.
    pub rows: Vec<ReportRow>,
    pub k: usize,
    pub ensemble_root: String,
    pub evaluated_users: usize,
    pub out: PathBuf,
}

impl ExperimentReport {
    pub fn row(&self, id: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn ensemble_map(&self) -> f64 {
        self.row(&self.ensemble_root).map_or(0.0, |r| r.map)
    }

    pub fn write_table(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "model\tdescription\tMAP@{}", self.k)?;
        for row in &self.rows {
            writeln!(out, "{}\t{}\t{:.6}", row.id, row.description, row.map)?;
        }
        out.flush()
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.description.len()).max().unwrap_or(0);
        writeln!(f, "{:<10} {:<width$} MAP@{}", "model", "description", self.k)?;
        for row in &self.rows {
            writeln!(f, "{:<10} {:<width$} {:.6}", row.id, row.description, row.map)?;
        }
        Ok(())
    }
}

/// Runs the whole pipeline on a dedicated pool of `threads` workers
/// (all cores when `None`).
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| Pipeline::new(config).and_then(|p| p.run()))
}

/// Training corpus, held-out names and the cache key of the training file.
type TrainSplit = (Corpus, BTreeMap<UserId, (NameId, NameId)>, Vec<u8>);

struct Pipeline<'a> {
    config: &'a ExperimentConfig,
    tree: EnsembleSpec,
    out: PathBuf,
}

impl<'a> Pipeline<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let tree = config.validate().stage("config")?;
        let out = config.out.clone();
        for sub in ["", "bags", "runs", "ensemble", "eval"] {
            let dir = out.join(sub);
            fs::create_dir_all(&dir)
                .map_err(|e| Error::io(&dir, e))
                .stage("config")?;
        }
        write_file(&out.join("config.toml"), config.to_toml()?.as_bytes()).stage("config")?;
        Ok(Pipeline { config, tree, out })
    }

    fn run(self) -> Result<ExperimentReport> {
        let corpus = self.ingest().stage("ingest")?;
        self.stats(&corpus).stage("stats")?;
        let (train, targets, train_key) = self.split(&corpus).stage("split")?;
        let users: Vec<UserId> = targets.keys().copied().collect();
        let run_paths = self.model_runs(&train, &users, &train_key).stage("models")?;

        let user_names: Vec<String> = users.iter().map(|&u| train.user_vocab().user(u).to_owned()).collect();
        let target_strings: Targets = targets
            .iter()
            .map(|(&u, &(a, b))| {
                let name = |n: NameId| train.name_vocab().name(n).to_owned();
                (train.user_vocab().user(u).to_owned(), (name(a), name(b)))
            })
            .collect();
        let ensemble_paths = self
            .ensemble(&run_paths, &user_names, &target_strings)
            .stage("ensemble")?;

        let mut rows = Vec::new();
        let descriptions = self
            .config
            .models
            .iter()
            .map(|m| (m.id.clone(), m.description.clone()))
            .chain(
                self.tree
                    .inner_nodes()
                    .map(|n| (n.to_owned(), ensemble_description(n, &self.tree))),
            );
        for ((id, description), path) in descriptions.zip(run_paths.iter().chain(&ensemble_paths)) {
            let result = evaluate_run_file(path, &target_strings, self.config.k).stage("evaluate")?;
            let eval_path = self.out.join("eval").join(format!("{id}.tsv"));
            write_with(&eval_path, |w| result.write_report(w)).stage("evaluate")?;
            info!("{id}: MAP@{} = {:.6}", self.config.k, result.map_at_k);
            rows.push(ReportRow {
                id,
                description,
                map: result.map_at_k,
            });
        }
        let report = ExperimentReport {
            rows,
            k: self.config.k,
            ensemble_root: self.tree.root_name().to_owned(),
            evaluated_users: targets.len(),
            out: self.out.clone(),
        };
        write_with(&self.out.join("report.tsv"), |w| report.write_table(w)).stage("evaluate")?;
        Ok(report)
    }

    fn ingest(&self) -> Result<Corpus> {
        let data = &self.config.data;
        let corpus = if let Some(path) = &data.corpus {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Corpus::read(BufReader::new(file))?
        } else {
            let (log, known) = (
                data.log.as_ref().expect("validated"),
                data.known.as_ref().expect("validated"),
            );
            let columns: ColumnMap = match &data.columns {
                Some(c) => c.parse()?,
                None => ColumnMap::default(),
            };
            let parsed = parse_activity_log(log, &columns)?;
            if !parsed.rejects.is_empty() {
                warn!("{} malformed log rows skipped", parsed.rejects.len());
            }
            let corpus = preprocess(&parsed.interactions, &KnownNames::read(known)?);
            let summary = PreprocessSummary::new(parsed.interactions.len(), &corpus);
            info!("preprocessed: {summary:?}");
            corpus
        };
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        write_with(&self.out.join("corpus.tsv"), |w| corpus.write(w))?;
        Ok(corpus)
    }

    fn stats(&self, corpus: &Corpus) -> Result<()> {
        let stats = compute_stats(corpus)?;
        write_file(&self.out.join("stats.txt"), stats.to_string().as_bytes())?;
        write_with(&self.out.join("names_per_user.tsv"), |w| {
            write_histogram(w, &stats.names_per_user)
        })?;
        write_with(&self.out.join("users_per_name.tsv"), |w| {
            write_histogram(w, &stats.users_per_name)
        })
    }

    /// Returns the training corpus, its targets and a hash of the training
    /// file for cache keys.
    fn split(&self, corpus: &Corpus) -> Result<TrainSplit> {
        let mode = match &self.config.split {
            SplitConfig::Strict => SplitMode::Strict,
            SplitConfig::Relaxed { users } => SplitMode::Relaxed(read_user_list(users)?),
        };
        let split = split_validation(corpus, &mode);
        if !split.skipped.is_empty() {
            warn!("{} requested users could not be split", split.skipped.len());
        }
        if split.targets.is_empty() {
            return Err(Error::config("the split left no users to evaluate"));
        }
        write_with(&self.out.join("split.tsv"), |w| split.write_targets(w))?;
        let mut train_bytes = Vec::new();
        split
            .train
            .write(&mut train_bytes)
            .map_err(|e| Error::io("<train>", e))?;
        write_file(&self.out.join("train.tsv"), &train_bytes)?;
        let key = Sha256::digest(&train_bytes).to_vec();
        Ok((split.train, split.targets, key))
    }

    fn model_runs(&self, train: &Corpus, users: &[UserId], train_key: &[u8]) -> Result<Vec<PathBuf>> {
        let mut bags: HashMap<BagSpec, CooccurrenceBag> = HashMap::new();
        let mut paths = Vec::new();
        let user_list: Vec<&str> = users.iter().map(|&u| train.user_vocab().user(u)).collect();
        for model in &self.config.models {
            let path = self.out.join("runs").join(format!("{}.{RUN_EXTENSION}", model.id));
            let key = cache_key(&[
                train_key,
                toml::to_string(model)
                    .map_err(|e| Error::config(e.to_string()))?
                    .as_bytes(),
                &self.config.seed.to_le_bytes(),
                &(self.config.n as u64).to_le_bytes(),
                user_list.join("\n").as_bytes(),
            ]);
            if is_cached(&path, &key) {
                info!("{}: reusing cached run", model.id);
            } else {
                let bag = match model.params.bag_spec() {
                    Some(spec) => {
                        if let Entry::Vacant(slot) = bags.entry(spec) {
                            slot.insert(self.bag(train, &spec, train_key)?);
                        }
                        bags.get(&spec)
                    }
                    None => None,
                };
                info!("{}: computing run for {} users", model.id, users.len());
                let run = run_model(model, train, users, bag, self.config.n, self.config.seed)?;
                write_with(&path, |w| run.write(train.name_vocab(), w))?;
                write_file(&key_path(&path), key.as_bytes())?;
            }
            paths.push(path);
        }
        Ok(paths)
    }

    fn bag(&self, train: &Corpus, spec: &BagSpec, train_key: &[u8]) -> Result<CooccurrenceBag> {
        let slug: String = spec
            .to_string()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let path = self.out.join("bags").join(format!("{slug}.bag"));
        let key = cache_key(&[train_key, spec.to_string().as_bytes()]);
        if is_cached(&path, &key) {
            info!("bag {spec}: reusing cached file");
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            return BagFile::read(BufReader::new(file))?.into_bag(train.name_vocab());
        }
        let bag = build_bag(train, spec)?;
        write_with(&path, |w| bag.write(train.name_vocab(), w))?;
        write_file(&key_path(&path), key.as_bytes())?;
        Ok(bag)
    }

    fn ensemble(&self, run_paths: &[PathBuf], users: &[String], targets: &Targets) -> Result<Vec<PathBuf>> {
        let target_names = targets.values().flat_map(|(a, b)| [a.as_str(), b.as_str()]);
        let store = RunStore::load_files(run_paths, target_names)?;
        let mut paths = Vec::new();
        for name in self.tree.inner_nodes() {
            let run = evaluate_tree(&self.tree.node(name)?, &store, users, self.config.n)?;
            let path = self.out.join("ensemble").join(format!("{name}.{RUN_EXTENSION}"));
            write_with(&path, |w| run.write(store.names(), w))?;
            if name == self.tree.root_name() {
                write_with(&self.out.join("submission.tsv"), |w| {
                    run.write_submission(store.names(), self.config.n, w)
                })?;
            }
            paths.push(path);
        }
        Ok(paths)
    }
}

fn ensemble_description(node: &str, tree: &EnsembleSpec) -> String {
    if node == tree.root_name() {
        "Final ensemble".to_owned()
    } else {
        "Sub-ensemble".to_owned()
    }
}

/// Scores a run file against held-out names. The CLI `evaluate` command and
/// the experiment report both go through here.
pub fn evaluate_run_file(path: &Path, targets: &Targets, k: usize) -> Result<EvalResult> {
    let target_names = targets.values().flat_map(|(a, b)| [a.as_str(), b.as_str()]);
    let store = RunStore::load_files(&[path.to_path_buf()], target_names)?;
    let run = store
        .models()
        .next()
        .and_then(|m| store.get(m))
        .expect("one file loaded");
    let ids = targets
        .iter()
        .map(|(u, (a, b))| {
            let id = |n: &str| store.names().name_id(n).expect("target names are interned");
            (u.clone(), (id(a), id(b)))
        })
        .collect();
    map_at_k(run, store.names(), &ids, k)
}

/// Reads a split file's targets.
pub fn read_split_file(path: &Path) -> Result<Targets> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_targets(BufReader::new(file))
}

/// One user per line; blank lines and `#` comments are skipped.
pub fn read_user_list(path: &Path) -> Result<BTreeSet<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut users = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('#') {
            users.insert(line.to_owned());
        }
    }
    Ok(users)
}

fn cache_key(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

fn key_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".key");
    PathBuf::from(name)
}

fn is_cached(artifact: &Path, key: &str) -> bool {
    artifact.is_file() && fs::read_to_string(key_path(artifact)).is_ok_and(|k| k == key)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    f(&mut writer)
        .and_then(|()| writer.flush())
        .map_err(|e| Error::io(path, e))
}
