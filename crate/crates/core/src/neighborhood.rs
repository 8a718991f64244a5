//! User-based top-N collaborative filtering over binary user-name sets.
//!
//! Neighbours are the `k` most similar users among those sharing at least
//! one name with the target (ties by ascending user). A candidate name is
//! scored with the summed similarity of the neighbours holding it.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::types::{sort_by_score_then_name, NameId, RankedList, Scored, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Tanimoto,
    LogLikelihood,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UBConfig {
    pub similarity: Similarity,
    pub k: usize,
    pub n: usize,
}

impl UBConfig {
    pub fn new(similarity: Similarity) -> Self {
        UBConfig {
            similarity,
            k: 100,
            n: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::config("neighbourhood size and list length must be at least 1"));
        }
        Ok(())
    }
}

/// Intersection size of two sorted, duplicate-free slices.
pub fn overlap<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// |a ∩ b| / |a ∪ b| from set sizes; 0 when both sets are empty.
pub fn tanimoto_from_counts(intersection: usize, a_len: usize, b_len: usize) -> f64 {
    let union = a_len + b_len - intersection;
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Tanimoto coefficient of two sorted, duplicate-free slices.
pub fn tanimoto<T: Ord>(a: &[T], b: &[T]) -> f64 {
    tanimoto_from_counts(overlap(a, b), a.len(), b.len())
}

fn x_log_x(x: u64) -> f64 {
    if x == 0 {
        0.0
    } else {
        let x = x as f64;
        x * x.ln()
    }
}

/// Dunning's G² statistic for a 2×2 contingency table.
pub fn log_likelihood_ratio(k11: u64, k12: u64, k21: u64, k22: u64) -> f64 {
    let total = k11 + k12 + k21 + k22;
    let cells = x_log_x(k11) + x_log_x(k12) + x_log_x(k21) + x_log_x(k22);
    let rows = x_log_x(k11 + k12) + x_log_x(k21 + k22);
    let cols = x_log_x(k11 + k21) + x_log_x(k12 + k22);
    // Rounding can leave a tiny negative value for independent tables.
    (2.0 * (cells - rows - cols + x_log_x(total))).max(0.0)
}

/// Log-likelihood similarity, `1 - 1 / (1 + G²)`, from set sizes.
pub fn log_likelihood_from_counts(intersection: usize, a_len: usize, b_len: usize, universe: usize) -> f64 {
    let k11 = intersection as u64;
    let k12 = (a_len - intersection) as u64;
    let k21 = (b_len - intersection) as u64;
    let k22 = (universe + intersection - a_len - b_len) as u64;
    let g2 = log_likelihood_ratio(k11, k12, k21, k22);
    1.0 - 1.0 / (1.0 + g2)
}

/// Log-likelihood similarity of two sorted, duplicate-free slices over a
/// universe of `universe` names. Requires `universe >= |a ∪ b|`.
pub fn log_likelihood_sim<T: Ord>(a: &[T], b: &[T], universe: usize) -> f64 {
    log_likelihood_from_counts(overlap(a, b), a.len(), b.len(), universe)
}

/// Neighbours of `user` ordered by similarity descending, then user id.
pub fn neighbours(user: UserId, corpus: &Corpus, config: &UBConfig) -> Vec<(UserId, f64)> {
    let own = &corpus.history(user).name_set;
    let mut shared: HashMap<UserId, usize> = HashMap::new();
    for &name in own {
        for &v in corpus.users_of(name) {
            if v != user {
                *shared.entry(v).or_insert(0) += 1;
            }
        }
    }
    let universe = corpus.num_names();
    let mut scored: Vec<(UserId, f64)> = shared
        .into_iter()
        .map(|(v, inter)| {
            let theirs = corpus.history(v).name_set.len();
            let sim = match config.similarity {
                Similarity::Tanimoto => tanimoto_from_counts(inter, own.len(), theirs),
                Similarity::LogLikelihood => log_likelihood_from_counts(inter, own.len(), theirs, universe),
            };
            (v, sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(config.k);
    scored
}

pub fn ub_recommend(model: &str, user: UserId, corpus: &Corpus, config: &UBConfig) -> RankedList {
    let history = corpus.history(user);
    if history.is_empty() {
        return RankedList::empty(model);
    }
    let mut scores: HashMap<NameId, f64> = HashMap::new();
    for (v, sim) in neighbours(user, corpus, config) {
        for &name in &corpus.history(v).name_set {
            if !history.contains(name) {
                *scores.entry(name).or_insert(0.0) += sim;
            }
        }
    }
    let mut items: Vec<Scored> = scores.into_iter().map(|(name, score)| Scored { name, score }).collect();
    sort_by_score_then_name(&mut items, config.n);
    RankedList::new(model, items)
}

pub fn ub_recommend_users(
    model: &str,
    corpus: &Corpus,
    users: &[UserId],
    config: &UBConfig,
) -> Vec<(UserId, RankedList)> {
    users
        .par_iter()
        .map(|&u| (u, ub_recommend(model, u, corpus, config)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Interaction;
    use crate::types::Activity;

    #[test]
    fn tanimoto_examples() {
        assert_eq!(tanimoto(&["x", "y", "z"], &["w", "y", "z"]), 0.5);
        assert_eq!(tanimoto(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(tanimoto(&[1, 2], &[3]), 0.0);
        assert_eq!(tanimoto::<u8>(&[], &[]), 0.0);
    }

    #[test]
    fn llr_is_zero_on_proportional_table() {
        assert_eq!(log_likelihood_ratio(1, 1, 1, 1), 0.0);
        assert!(log_likelihood_ratio(2, 4, 3, 6) < 1e-12);
        assert_eq!(log_likelihood_sim(&[1, 2], &[2, 3], 4), 0.0);
    }

    #[test]
    fn llr_of_strong_association() {
        assert!(log_likelihood_from_counts(10, 10, 10, 1000) > 0.99);
    }

    fn corpus(users: &[(&str, &[&str])]) -> Corpus {
        let rows: Vec<Interaction> = users
            .iter()
            .flat_map(|&(u, names)| {
                names.iter().map(move |n| Interaction {
                    user: u.into(),
                    name: (*n).into(),
                    activity: Activity::EnterSearch,
                    timestamp: 0,
                })
            })
            .collect();
        Corpus::from_interactions(&rows)
    }

    #[test]
    fn single_neighbour() {
        let c = corpus(&[("u", &["a", "b"]), ("v", &["b", "z"]), ("w", &["q"])]);
        let u = c.user_vocab().user_id("u").unwrap();
        let list = ub_recommend("m6", u, &c, &UBConfig::new(Similarity::Tanimoto));
        assert_eq!(list.len(), 1);
        assert_eq!(c.name_vocab().name(list.items[0].name), "z");
        assert_eq!(list.items[0].score, 1.0 / 3.0);
    }

    #[test]
    fn no_overlap_gives_empty_list() {
        let c = corpus(&[("u", &["a"]), ("v", &["b", "c"])]);
        let u = c.user_vocab().user_id("u").unwrap();
        for sim in [Similarity::Tanimoto, Similarity::LogLikelihood] {
            assert!(ub_recommend("m", u, &c, &UBConfig::new(sim)).is_empty());
        }
    }

    #[test]
    fn neighbourhood_is_capped_at_k() {
        let c = corpus(&[
            ("u", &["a"]),
            ("v1", &["a", "x"]),
            ("v2", &["a", "y"]),
            ("v3", &["a", "b", "z"]),
        ]);
        let u = c.user_vocab().user_id("u").unwrap();
        let config = UBConfig {
            k: 2,
            ..UBConfig::new(Similarity::Tanimoto)
        };
        let n = neighbours(u, &c, &config);
        let ids: Vec<&str> = n.iter().map(|&(v, _)| c.user_vocab().user(v)).collect();
        assert_eq!(ids, ["v1", "v2"]);
        let list = ub_recommend("m6", u, &c, &config);
        let names: Vec<&str> = list.names().map(|n| c.name_vocab().name(n)).collect();
        assert_eq!(names, ["x", "y"]);
    }
}
