//! Name-to-Name collaborative filtering.
//!
//! A recommendation list is grown by repeated two-stage sampling: draw a seed
//! name from the user's own names (biased by interaction frequency or by
//! recency), then draw a co-occurring name from that seed's bag entry with
//! probability proportional to the pair multiplicity. A drawn name is kept,
//! scored with its multiplicity, the first time it shows up unless the user
//! already knows it. When the first pass cannot fill `n` slots, further
//! passes use the current recommendations as seeds, reaching names two or
//! more hops away. The final list is sorted by stored multiplicity with ties
//! kept in acceptance order.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::cooccur::{BagEntry, CooccurrenceBag};
use crate::error::{Error, Result};
use crate::ingest::{Corpus, UserHistory};
use crate::seed::rng_for;
use crate::types::{ActivityFilter, NameId, RankedList, Scored, UserId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeedBias {
    /// P(i) proportional to the user's interaction count with i.
    Frequency,
    /// P(i) proportional to `decay^d`, where d counts the distinct names the
    /// user touched after their last interaction with i.
    Recency { decay: f64 },
}

impl SeedBias {
    pub const DEFAULT_DECAY: f64 = 0.5;
}

#[derive(Clone, Debug, PartialEq)]
pub struct N2NConfig {
    pub bias: SeedBias,
    pub n: usize,
    /// Sampling budget of a single pass.
    pub max_iterations: usize,
    pub seed: u64,
}

impl N2NConfig {
    pub fn new(bias: SeedBias, n: usize) -> Self {
        N2NConfig {
            bias,
            n,
            max_iterations: 50 * n,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("list length must be at least 1"));
        }
        if self.max_iterations < self.n {
            return Err(Error::config("max_iterations must be at least the list length"));
        }
        if let SeedBias::Recency { decay } = self.bias {
            if !(decay > 0.0 && decay <= 1.0) {
                return Err(Error::config(format!("recency decay {decay} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Picks an index from a cumulative weight vector.
///
/// `names[k]` is the item at index `k` and `cumulative[k]` is the sum of the
/// weights of items `0..=k`. Production code samples at random; tests can
/// script the draws.
pub trait Sampler {
    fn pick(&mut self, names: &[NameId], cumulative: &[f64]) -> usize;
}

/// Weighted sampling driven by any [`Rng`].
#[derive(Debug)]
pub struct RngSampler<R>(pub R);

impl<R: Rng> Sampler for RngSampler<R> {
    fn pick(&mut self, _names: &[NameId], cumulative: &[f64]) -> usize {
        let total = cumulative[cumulative.len() - 1];
        let x = self.0.random::<f64>() * total;
        cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
    }
}

/// A discrete distribution over seed names.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedDistribution {
    pub names: Vec<NameId>,
    pub cumulative: Vec<f64>,
}

impl SeedDistribution {
    fn from_weights(weighted: impl IntoIterator<Item = (NameId, f64)>) -> Self {
        let mut total = 0.0;
        let (names, cumulative) = weighted
            .into_iter()
            .map(|(name, w)| {
                total += w;
                (name, total)
            })
            .unzip();
        SeedDistribution { names, cumulative }
    }

    /// Seed distribution of a user under an activity filter.
    pub fn for_history(history: &UserHistory, filter: ActivityFilter, bias: SeedBias) -> Result<Self> {
        let events = history.sequence.iter().filter(|e| filter.contains(e.activity));
        let mut weights: Vec<(NameId, f64)> = Vec::new();
        match bias {
            SeedBias::Frequency => {
                for e in events {
                    match weights.iter_mut().find(|(n, _)| *n == e.name) {
                        Some((_, w)) => *w += 1.0,
                        None => weights.push((e.name, 1.0)),
                    }
                }
            }
            SeedBias::Recency { decay } => {
                let mut seen: Vec<NameId> = Vec::new();
                for e in events.rev() {
                    if !seen.contains(&e.name) {
                        weights.push((e.name, decay.powi(seen.len() as i32)));
                        seen.push(e.name);
                    }
                }
            }
        }
        if weights.is_empty() {
            return Err(Error::NoSeedMaterial {
                filter: filter.to_string(),
            });
        }
        weights.sort_by_key(|&(n, _)| n);
        Ok(SeedDistribution::from_weights(weights))
    }

    fn uniform(names: impl IntoIterator<Item = NameId>) -> Self {
        SeedDistribution::from_weights(names.into_iter().map(|n| (n, 1.0)))
    }

    /// Drops names that have no co-occurrences; they can never yield a draw.
    fn restricted_to(self, bag: &CooccurrenceBag) -> Self {
        let weights: Vec<f64> = self
            .cumulative
            .iter()
            .scan(0.0, |prev, &c| {
                let w = c - *prev;
                *prev = c;
                Some(w)
            })
            .collect();
        SeedDistribution::from_weights(
            self.names
                .into_iter()
                .zip(weights)
                .filter(|&(n, _)| !bag.entry(n).is_empty()),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Normalised probabilities, in name order.
    pub fn probabilities(&self) -> Vec<(NameId, f64)> {
        let total = self.cumulative.last().copied().unwrap_or(0.0);
        let mut prev = 0.0;
        self.names
            .iter()
            .zip(&self.cumulative)
            .map(|(&n, &c)| {
                let p = (c - prev) / total;
                prev = c;
                (n, p)
            })
            .collect()
    }

    pub fn sample(&self, sampler: &mut impl Sampler) -> NameId {
        self.names[sampler.pick(&self.names, &self.cumulative)]
    }
}

pub fn sample_seed_name(
    history: &UserHistory,
    filter: ActivityFilter,
    bias: SeedBias,
    sampler: &mut impl Sampler,
) -> Result<NameId> {
    Ok(SeedDistribution::for_history(history, filter, bias)?.sample(sampler))
}

/// Draws a co-name with probability proportional to its multiplicity;
/// `None` for an empty entry.
pub fn sample_co_name(entry: &BagEntry, sampler: &mut impl Sampler) -> Option<(NameId, u32)> {
    if entry.is_empty() {
        return None;
    }
    let k = sampler.pick(&entry.names, &entry.cumulative);
    Some((entry.names[k], entry.multiplicities[k]))
}

/// Runs the sampler-driven recommendation loop for one user.
///
/// The seed filter is the bag's activity filter. Returns an empty list when
/// the user has no seed material under that filter.
pub fn recommend(
    model: &str,
    history: &UserHistory,
    bag: &CooccurrenceBag,
    config: &N2NConfig,
    sampler: &mut impl Sampler,
) -> RankedList {
    let seeds = match SeedDistribution::for_history(history, bag.spec().filter, config.bias) {
        Ok(d) => d.restricted_to(bag),
        Err(_) => return RankedList::empty(model),
    };
    let mut recs: Vec<Scored> = Vec::new();
    let mut accepted: HashSet<NameId> = HashSet::new();
    let mut seeds = seeds;
    while !seeds.is_empty() {
        let added = name_to_name_pass(&seeds, history, bag, config, sampler, &mut recs, &mut accepted);
        if recs.len() >= config.n || added == 0 {
            break;
        }
        seeds = SeedDistribution::uniform(recs.iter().map(|s| s.name));
    }
    // Stable: equal multiplicities keep acceptance order.
    recs.sort_by(|a, b| b.score.total_cmp(&a.score));
    RankedList::new(model, recs)
}

/// One bounded sampling pass; returns how many names it accepted.
fn name_to_name_pass(
    seeds: &SeedDistribution,
    history: &UserHistory,
    bag: &CooccurrenceBag,
    config: &N2NConfig,
    sampler: &mut impl Sampler,
    recs: &mut Vec<Scored>,
    accepted: &mut HashSet<NameId>,
) -> usize {
    let acceptable = |j: NameId, accepted: &HashSet<NameId>| !accepted.contains(&j) && !history.contains(j);

    // Once every reachable candidate is taken, further draws are all rejects.
    let mut remaining: usize = {
        let mut candidates = HashSet::new();
        for &i in &seeds.names {
            candidates.extend(bag.entry(i).names.iter().copied().filter(|&j| acceptable(j, accepted)));
        }
        candidates.len()
    };

    let before = recs.len();
    let mut t = 0;
    while recs.len() < config.n && t < config.max_iterations && remaining > 0 {
        t += 1;
        let i = seeds.sample(sampler);
        let Some((j, m)) = sample_co_name(bag.entry(i), sampler) else {
            continue;
        };
        if acceptable(j, accepted) {
            accepted.insert(j);
            recs.push(Scored {
                name: j,
                score: f64::from(m),
            });
            remaining -= 1;
        }
    }
    recs.len() - before
}

/// Recommends for several users in parallel. Each user draws from a private
/// RNG seeded from `(config.seed, user name)`, so output does not depend on
/// the thread count or on which other users are requested.
pub fn recommend_users(
    model: &str,
    corpus: &Corpus,
    users: &[UserId],
    bag: &CooccurrenceBag,
    config: &N2NConfig,
) -> Vec<(UserId, RankedList)> {
    users
        .par_iter()
        .map(|&u| {
            let mut sampler = RngSampler(rng_for(config.seed, corpus.user_vocab().user(u)));
            (u, recommend(model, corpus.history(u), bag, config, &mut sampler))
        })
        .collect()
}
