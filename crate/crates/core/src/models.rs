//! Model definitions as they appear in experiment configs, the presets
//! `m0`..`m8` plus the popularity baseline, and a single entry point that
//! turns a definition into a run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cooccur::{popularity, BagSpec, CooccurrenceBag, PopularityMeasure};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::n2n::{recommend_users, N2NConfig, SeedBias};
use crate::neighborhood::{ub_recommend_users, Similarity, UBConfig};
use crate::pagerank::{pagerank, Graph, PRConfig};
use crate::runs::Run;
use crate::seed::derive_seed;
use crate::types::{ActivityFilter, RankedList, Scored, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Frequency,
    Recency,
}

/// Model parameters, tagged by `kind` in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    N2n {
        bias: BiasKind,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_filter")]
        activities: ActivityFilter,
        #[serde(default)]
        exclude_top: usize,
        #[serde(default)]
        popularity: PopularityMeasure,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iterations: Option<usize>,
    },
    UserBased {
        similarity: Similarity,
        #[serde(default = "default_neighbours")]
        neighbours: usize,
    },
    Pagerank {
        #[serde(default = "default_filter")]
        activities: ActivityFilter,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_true")]
        weighted: bool,
    },
    /// The `n` names with the most distinct users, identical for everyone.
    Popular,
}

fn default_decay() -> f64 {
    SeedBias::DEFAULT_DECAY
}
fn default_filter() -> ActivityFilter {
    ActivityFilter::SEARCH_AND_DETAILS
}
fn default_neighbours() -> usize {
    100
}
fn default_damping() -> f64 {
    PRConfig::default().damping
}
fn default_epsilon() -> f64 {
    PRConfig::default().epsilon
}
fn default_max_iter() -> usize {
    PRConfig::default().max_iter
}
fn default_true() -> bool {
    true
}

impl ModelParams {
    /// The bag this model reads, if any.
    pub fn bag_spec(&self) -> Option<BagSpec> {
        match *self {
            ModelParams::N2n {
                activities,
                exclude_top,
                popularity,
                ..
            } => Some(BagSpec {
                filter: activities,
                exclude_top_k: exclude_top,
                popularity,
            }),
            ModelParams::Pagerank { activities, .. } => Some(BagSpec::new(activities, 0)),
            ModelParams::UserBased { .. } | ModelParams::Popular => None,
        }
    }

    /// True when the model emits one list shared by all users.
    pub fn is_shared(&self) -> bool {
        matches!(self, ModelParams::Pagerank { .. } | ModelParams::Popular)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(flatten)]
    pub params: ModelParams,
}

pub const BASELINE_ID: &str = "pop";

impl ModelSpec {
    /// Looks up `m0`..`m8` or `pop`.
    pub fn preset(id: &str) -> Option<ModelSpec> {
        let n2n = |bias, activities, exclude_top| ModelParams::N2n {
            bias,
            decay: default_decay(),
            activities,
            exclude_top,
            popularity: PopularityMeasure::DistinctUsers,
            max_iterations: None,
        };
        let sd = ActivityFilter::SEARCH_AND_DETAILS;
        let es = ActivityFilter::ENTER_SEARCH;
        let (description, params) = match id {
            "m0" => ("N2N-Freq", n2n(BiasKind::Frequency, sd, 0)),
            "m1" => ("N2N-Freq-ES", n2n(BiasKind::Frequency, es, 0)),
            "m2" => ("N2N-Time", n2n(BiasKind::Recency, sd, 0)),
            "m3" => ("N2N-Time-ES", n2n(BiasKind::Recency, es, 0)),
            "m4" => ("N2N-Time-NoTop5", n2n(BiasKind::Recency, sd, 5)),
            "m5" => ("N2N-Time-NoTop10", n2n(BiasKind::Recency, sd, 10)),
            "m6" | "m7" => {
                let similarity = if id == "m6" {
                    Similarity::Tanimoto
                } else {
                    Similarity::LogLikelihood
                };
                let description = if id == "m6" { "UB-T" } else { "UB-LL" };
                (
                    description,
                    ModelParams::UserBased {
                        similarity,
                        neighbours: default_neighbours(),
                    },
                )
            }
            "m8" => (
                "PR",
                ModelParams::Pagerank {
                    activities: sd,
                    damping: default_damping(),
                    epsilon: default_epsilon(),
                    max_iter: default_max_iter(),
                    weighted: true,
                },
            ),
            BASELINE_ID => ("Most Popular Names", ModelParams::Popular),
            _ => return None,
        };
        Some(ModelSpec {
            id: id.to_owned(),
            description: description.to_owned(),
            params,
        })
    }

    /// The nine ensemble inputs followed by the popularity baseline.
    pub fn defaults() -> Vec<ModelSpec> {
        ["m0", "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", BASELINE_ID]
            .into_iter()
            .map(|id| ModelSpec::preset(id).expect("preset ids are known"))
            .collect()
    }
}

/// Reads the `[[models]]` tables of a TOML file.
pub fn read_model_file(path: &Path) -> Result<Vec<ModelSpec>> {
    #[derive(Deserialize)]
    struct Models {
        models: Vec<ModelSpec>,
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: Models = toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok(parsed.models)
}

/// Produces a run of `spec` for `users`.
///
/// `bag` must be the bag of [`ModelParams::bag_spec`] when that is `Some`.
/// Sampling models derive their seed from `(seed, spec.id)`.
pub fn run_model(
    spec: &ModelSpec,
    corpus: &Corpus,
    users: &[UserId],
    bag: Option<&CooccurrenceBag>,
    n: usize,
    seed: u64,
) -> Result<Run> {
    let id = spec.id.as_str();
    let need_bag = || bag.ok_or_else(|| Error::config(format!("model `{id}` needs a co-occurrence bag")));
    let personal = |lists: Vec<(UserId, RankedList)>| {
        let mut run = Run::new(id);
        for (u, list) in lists {
            run.lists.insert(corpus.user_vocab().user(u).to_owned(), list);
        }
        run
    };
    match spec.params {
        ModelParams::N2n {
            bias,
            decay,
            max_iterations,
            ..
        } => {
            let bias = match bias {
                BiasKind::Frequency => SeedBias::Frequency,
                BiasKind::Recency => SeedBias::Recency { decay },
            };
            let mut config = N2NConfig::new(bias, n).with_seed(derive_seed(seed, id));
            if let Some(max) = max_iterations {
                config.max_iterations = max;
            }
            config.validate()?;
            Ok(personal(recommend_users(id, corpus, users, need_bag()?, &config)))
        }
        ModelParams::UserBased { similarity, neighbours } => {
            let config = UBConfig {
                similarity,
                k: neighbours,
                n,
            };
            config.validate()?;
            Ok(personal(ub_recommend_users(id, corpus, users, &config)))
        }
        ModelParams::Pagerank {
            damping,
            epsilon,
            max_iter,
            weighted,
            ..
        } => {
            let config = PRConfig {
                damping,
                epsilon,
                max_iter,
                weighted,
            };
            let mut ranking = pagerank(id, &Graph::from_bag(need_bag()?), &config)?.ranking;
            ranking.items.truncate(n);
            Ok(Run::shared(id, ranking))
        }
        ModelParams::Popular => {
            let items = popularity(corpus)
                .entries
                .iter()
                .take(n)
                .map(|&(name, users)| Scored {
                    name,
                    score: users as f64,
                })
                .collect();
            Ok(Run::shared(id, RankedList::new(id, items)))
        }
    }
}
