//! Brute-force reference implementations and corpus builders shared by the
//! integration tests. Nothing here calls into the algorithms under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use namecf::ingest::{Corpus, Interaction};
use namecf::{Activity, ActivityFilter, RankedList};
use proptest::prelude::*;

/// Builds a corpus from `(user, [name, ...])` with ENTER_SEARCH rows at
/// increasing timestamps.
pub fn corpus(users: &[(&str, &[&str])]) -> Corpus {
    let rows: Vec<Interaction> = users
        .iter()
        .flat_map(|&(u, names)| {
            names.iter().enumerate().map(move |(t, n)| Interaction {
                user: u.into(),
                name: (*n).into(),
                activity: Activity::EnterSearch,
                timestamp: t as u64,
            })
        })
        .collect();
    Corpus::from_interactions(&rows)
}

/// Three users, seven names.
pub fn three_user_corpus() -> Corpus {
    corpus(&[
        ("u1", &["i1", "i4", "i2", "i3"]),
        ("u2", &["i4", "i5", "i1", "i4", "i3"]),
        ("u3", &["i3", "i5", "i6", "i7", "i4"]),
    ])
}

/// Five users; `u1` is the one recommended for.
pub fn five_user_corpus() -> Corpus {
    corpus(&[
        ("u1", &["i4", "i1", "i4"]),
        ("u2", &["i1", "i4", "i3"]),
        ("u3", &["i4", "i5", "i1", "i4", "i3"]),
        ("u4", &["i3", "i6", "i7", "i4"]),
        ("u5", &["i1", "i5", "i2"]),
    ])
}

/// Bag entry of `name` as `(co-name, multiplicity)` strings, in stored order.
pub fn entry_strings(corpus: &Corpus, bag: &namecf::cooccur::CooccurrenceBag, name: &str) -> Vec<(String, u32)> {
    let id = corpus.name_vocab().name_id(name).expect("name in corpus");
    bag.entry(id)
        .iter()
        .map(|(j, m)| (corpus.name_vocab().name(j).to_owned(), m))
        .collect()
}

pub fn list_strings(corpus: &Corpus, list: &RankedList) -> Vec<(String, f64)> {
    list.items
        .iter()
        .map(|s| (corpus.name_vocab().name(s.name).to_owned(), s.score))
        .collect()
}

const ACTIVITIES: [Activity; 5] = [
    Activity::EnterSearch,
    Activity::LinkSearch,
    Activity::NameDetails,
    Activity::LinkCategorySearch,
    Activity::AddFavorite,
];

/// Random logs with up to `max_users` users and `max_names` names. Every
/// row carries a distinct timestamp.
pub fn arb_interactions(max_users: usize, max_names: usize) -> impl Strategy<Value = Vec<Interaction>> {
    let row = (0..max_users, 0..max_names, 0..ACTIVITIES.len());
    prop::collection::vec(row, 1..(max_users * 6)).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(t, (u, n, a))| Interaction {
                user: format!("u{u}"),
                name: format!("n{n}"),
                activity: ACTIVITIES[a],
                timestamp: t as u64,
            })
            .collect()
    })
}

/// Name sets per user, restricted to `filter`.
pub fn name_sets(rows: &[Interaction], filter: ActivityFilter) -> BTreeMap<String, BTreeSet<String>> {
    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in rows {
        let set = sets.entry(r.user.clone()).or_default();
        if filter.contains(r.activity) {
            set.insert(r.name.clone());
        }
    }
    sets
}

/// `m(i, j)` for every ordered pair, counted user by user; the `k` most
/// popular names (distinct users over all activities, ties by name) removed
/// first.
pub fn oracle_bag(rows: &[Interaction], filter: ActivityFilter, k: usize) -> BTreeMap<(String, String), u32> {
    let all = name_sets(rows, ActivityFilter::ALL);
    let mut users_per_name: BTreeMap<String, usize> = BTreeMap::new();
    for set in all.values() {
        for n in set {
            *users_per_name.entry(n.clone()).or_default() += 1;
        }
    }
    let mut by_pop: Vec<(String, usize)> = users_per_name.into_iter().collect();
    by_pop.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let excluded: BTreeSet<String> = by_pop.into_iter().take(k).map(|(n, _)| n).collect();

    let mut m = BTreeMap::new();
    for set in name_sets(rows, filter).values() {
        for i in set {
            for j in set {
                if i != j && !excluded.contains(i) && !excluded.contains(j) {
                    *m.entry((i.clone(), j.clone())).or_insert(0) += 1;
                }
            }
        }
    }
    m
}

fn ln_term(k: f64, expected: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (k / expected).ln()
    }
}

/// G² written as `2 Σ k ln(k / E)` with `E = row·col / total`.
pub fn oracle_g2(k11: f64, k12: f64, k21: f64, k22: f64) -> f64 {
    let t = k11 + k12 + k21 + k22;
    let (r1, r2) = (k11 + k12, k21 + k22);
    let (c1, c2) = (k11 + k21, k12 + k22);
    let g = 2.0
        * (ln_term(k11, r1 * c1 / t)
            + ln_term(k12, r1 * c2 / t)
            + ln_term(k21, r2 * c1 / t)
            + ln_term(k22, r2 * c2 / t));
    g.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sim {
    Tanimoto,
    LogLikelihood,
}

/// User-based kNN straight from the definition, over every other user.
pub fn oracle_ub(
    sets: &BTreeMap<String, BTreeSet<String>>,
    user: &str,
    sim: Sim,
    k: usize,
    n: usize,
) -> Vec<(String, f64)> {
    let universe: BTreeSet<&String> = sets.values().flatten().collect();
    let own = &sets[user];
    let mut neighbours: Vec<(&String, f64)> = Vec::new();
    for (v, theirs) in sets {
        if v == user {
            continue;
        }
        let inter = own.intersection(theirs).count();
        if inter == 0 {
            continue;
        }
        let union = own.union(theirs).count();
        let s = match sim {
            Sim::Tanimoto => inter as f64 / union as f64,
            Sim::LogLikelihood => {
                let k11 = inter as f64;
                let k12 = (own.len() - inter) as f64;
                let k21 = (theirs.len() - inter) as f64;
                let k22 = (universe.len() - union) as f64;
                1.0 - 1.0 / (1.0 + oracle_g2(k11, k12, k21, k22))
            }
        };
        neighbours.push((v, s));
    }
    neighbours.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    neighbours.truncate(k);
    let mut scores: BTreeMap<&String, f64> = BTreeMap::new();
    for (v, s) in &neighbours {
        for name in &sets[*v] {
            if !own.contains(name) {
                *scores.entry(name).or_insert(0.0) += s;
            }
        }
    }
    let mut out: Vec<(String, f64)> = scores.into_iter().map(|(n, s)| (n.clone(), s)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.truncate(n);
    out
}

/// Weighted reciprocal-rank fusion over string lists, untruncated.
pub fn oracle_rrf(lists: &[Vec<String>], alphas: &[f64]) -> Vec<(String, f64)> {
    let mut scores: BTreeMap<&String, f64> = BTreeMap::new();
    for (list, &alpha) in lists.iter().zip(alphas) {
        for (pos, name) in list.iter().enumerate() {
            *scores.entry(name).or_insert(0.0) += alpha / (pos + 1) as f64;
        }
    }
    let mut out: Vec<(String, f64)> = scores.into_iter().map(|(n, s)| (n.clone(), s)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Average precision of two targets, placing missing ones after position k.
pub fn oracle_ap(list: &[String], a: &str, b: &str, k: usize) -> f64 {
    let mut next_virtual = k;
    let mut pos = |t: &str| match list.iter().take(k).position(|x| x == t) {
        Some(p) => p + 1,
        None => {
            next_virtual += 1;
            next_virtual
        }
    };
    let (pa, pb) = (pos(a), pos(b));
    let (first, second) = (pa.min(pb), pa.max(pb));
    (1.0 / first as f64 + 2.0 / second as f64) / 2.0
}

/// Compares a ranking against a reference that may differ by rounding:
/// same length, scores within `tol` position by position, and every name's
/// reference score within `tol` of the score it was given. Names inside a
/// group of near-equal scores may therefore appear in any order.
pub fn rankings_agree(actual: &[(String, f64)], reference: &[(String, f64)], tol: f64) -> Result<(), String> {
    if actual.len() != reference.len() {
        return Err(format!("length {} vs {}", actual.len(), reference.len()));
    }
    let by_name: BTreeMap<&String, f64> = reference.iter().map(|(n, s)| (n, *s)).collect();
    let mut seen = BTreeSet::new();
    for (p, ((name, score), (_, ref_score))) in actual.iter().zip(reference).enumerate() {
        if (score - ref_score).abs() > tol {
            return Err(format!("position {p}: score {score} vs {ref_score}"));
        }
        if !seen.insert(name) {
            return Err(format!("{name} repeated"));
        }
        match by_name.get(name) {
            Some(s) if (s - score).abs() <= tol => {}
            Some(s) => return Err(format!("{name} scored {score}, reference {s}")),
            // A name cut off in the reference by a near-tie at the boundary.
            None if (score - reference.last().map_or(f64::NAN, |r| r.1)).abs() <= tol => {}
            None => return Err(format!("{name} not in reference")),
        }
    }
    Ok(())
}
