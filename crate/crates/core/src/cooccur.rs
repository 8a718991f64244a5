//! The bag of co-occurring names.
//!
//! For a name `i`, its bag entry lists every name `j != i` that appears
//! together with `i` in at least one user's name set, with multiplicity
//! `m(i, j)` = the number of distinct users whose (filtered) name set holds
//! both. A user contributes at most one to a pair no matter how often they
//! interacted with either name.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::types::{ActivityFilter, NameId, Vocab};

pub const BAG_HEADER_PREFIX: &str = "#namecf-bag v1";

/// How "most popular" is measured when excluding top names.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityMeasure {
    /// Number of distinct users, |U(i)|.
    #[default]
    DistinctUsers,
    /// Number of raw interactions.
    Interactions,
}

/// Names ordered by descending popularity, ties by ascending name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopularityRanking {
    pub entries: Vec<(NameId, usize)>,
}

impl PopularityRanking {
    pub fn top(&self, k: usize) -> impl Iterator<Item = NameId> + '_ {
        self.entries.iter().take(k).map(|&(name, _)| name)
    }
}

pub fn popularity(corpus: &Corpus) -> PopularityRanking {
    popularity_by(corpus, PopularityMeasure::DistinctUsers)
}

pub fn popularity_by(corpus: &Corpus, measure: PopularityMeasure) -> PopularityRanking {
    let mut counts = vec![0usize; corpus.name_vocab().len()];
    match measure {
        PopularityMeasure::DistinctUsers => {
            for name in corpus.names() {
                counts[name.index()] = corpus.users_of(name).len();
            }
        }
        PopularityMeasure::Interactions => {
            for h in corpus.histories() {
                for e in &h.sequence {
                    counts[e.name.index()] += 1;
                }
            }
        }
    }
    let mut entries: Vec<(NameId, usize)> = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(i, c)| (NameId(i as u32), c))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    PopularityRanking { entries }
}

/// Parameters that determine a bag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BagSpec {
    pub filter: ActivityFilter,
    pub exclude_top_k: usize,
    pub popularity: PopularityMeasure,
}

impl BagSpec {
    pub fn new(filter: ActivityFilter, exclude_top_k: usize) -> Self {
        BagSpec {
            filter,
            exclude_top_k,
            popularity: PopularityMeasure::DistinctUsers,
        }
    }

    fn parse_header(line: &str) -> Result<Self> {
        let bad = |msg: &str| Error::format("bag", 1, msg.to_string());
        let rest = line
            .strip_prefix(BAG_HEADER_PREFIX)
            .ok_or_else(|| bad("expected `#namecf-bag v1` header"))?;
        let mut filter = None;
        let mut exclude = None;
        let mut popularity = PopularityMeasure::DistinctUsers;
        for token in rest.split_whitespace() {
            match token.split_once('=') {
                Some(("filter", v)) => filter = Some(v.parse().map_err(|e: Error| bad(&e.to_string()))?),
                Some(("exclude", v)) => exclude = Some(v.parse().map_err(|_| bad("bad exclude count"))?),
                Some(("popularity", "users")) => popularity = PopularityMeasure::DistinctUsers,
                Some(("popularity", "interactions")) => popularity = PopularityMeasure::Interactions,
                _ => return Err(bad(&format!("unexpected header token `{token}`"))),
            }
        }
        Ok(BagSpec {
            filter: filter.ok_or_else(|| bad("header lacks filter="))?,
            exclude_top_k: exclude.ok_or_else(|| bad("header lacks exclude="))?,
            popularity,
        })
    }
}

impl fmt::Display for BagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "filter={} exclude={}", self.filter, self.exclude_top_k)?;
        if self.popularity == PopularityMeasure::Interactions {
            f.write_str(" popularity=interactions")?;
        }
        Ok(())
    }
}

/// Co-names of one name, sorted by multiplicity descending then name ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BagEntry {
    pub names: Vec<NameId>,
    pub multiplicities: Vec<u32>,
    /// Running sum of `multiplicities`, for weighted sampling.
    pub cumulative: Vec<f64>,
}

impl BagEntry {
    fn from_pairs(mut pairs: Vec<(NameId, u32)>) -> Self {
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut total = 0.0;
        let mut entry = BagEntry::default();
        for (name, m) in pairs {
            total += f64::from(m);
            entry.names.push(name);
            entry.multiplicities.push(m);
            entry.cumulative.push(total);
        }
        entry
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NameId, u32)> + '_ {
        self.names.iter().copied().zip(self.multiplicities.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceBag {
    spec: BagSpec,
    entries: Vec<BagEntry>,
    excluded: Vec<NameId>,
}

/// Builds the co-occurrence bag of `corpus` under `spec`.
///
/// Excluded names are removed from every user's name set before pairs are
/// formed, so they neither get an entry nor add mass to anyone else's.
pub fn build_bag(corpus: &Corpus, spec: &BagSpec) -> Result<CooccurrenceBag> {
    let num_names = corpus.num_names();
    if spec.exclude_top_k > 0 && spec.exclude_top_k >= num_names {
        return Err(Error::config(format!(
            "cannot exclude the top {} of {num_names} names",
            spec.exclude_top_k
        )));
    }
    let mut excluded: Vec<NameId> = popularity_by(corpus, spec.popularity).top(spec.exclude_top_k).collect();
    excluded.sort_unstable();

    let histories: Vec<_> = corpus.histories().collect();
    let counts: HashMap<(NameId, NameId), u32> = histories
        .par_iter()
        .fold(HashMap::new, |mut acc, h| {
            let mut names = h.filtered_names(spec.filter);
            names.retain(|n| excluded.binary_search(n).is_err());
            for (pos, &a) in names.iter().enumerate() {
                for &b in &names[pos + 1..] {
                    *acc.entry((a, b)).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |left, right| {
            if left.len() >= right.len() {
                merge_counts(left, right)
            } else {
                merge_counts(right, left)
            }
        });

    let triples = counts.into_iter().map(|((a, b), m)| (a, b, m));
    Ok(CooccurrenceBag::from_triples(
        corpus.name_vocab().len(),
        *spec,
        excluded,
        triples,
    ))
}

fn merge_counts(
    mut into: HashMap<(NameId, NameId), u32>,
    from: HashMap<(NameId, NameId), u32>,
) -> HashMap<(NameId, NameId), u32> {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
    into
}

impl CooccurrenceBag {
    /// Assembles a bag from unordered pairs, each given once.
    fn from_triples(
        vocab_len: usize,
        spec: BagSpec,
        excluded: Vec<NameId>,
        triples: impl IntoIterator<Item = (NameId, NameId, u32)>,
    ) -> Self {
        let mut per_name: Vec<Vec<(NameId, u32)>> = vec![Vec::new(); vocab_len];
        for (a, b, m) in triples {
            per_name[a.index()].push((b, m));
            per_name[b.index()].push((a, m));
        }
        CooccurrenceBag {
            spec,
            entries: per_name.into_iter().map(BagEntry::from_pairs).collect(),
            excluded,
        }
    }

    pub fn spec(&self) -> &BagSpec {
        &self.spec
    }

    /// Names removed as too popular, sorted by id. Empty for bags read from
    /// disk, which only carry the exclusion count.
    pub fn excluded(&self) -> &[NameId] {
        &self.excluded
    }

    /// The entry for `name`; empty when the name has no co-occurrences or is
    /// outside the vocabulary the bag was built over.
    pub fn entry(&self, name: NameId) -> &BagEntry {
        static EMPTY: BagEntry = BagEntry {
            names: Vec::new(),
            multiplicities: Vec::new(),
            cumulative: Vec::new(),
        };
        self.entries.get(name.index()).unwrap_or(&EMPTY)
    }

    pub fn multiplicity(&self, i: NameId, j: NameId) -> Option<u32> {
        self.entry(i).iter().find(|&(n, _)| n == j).map(|(_, m)| m)
    }

    /// Ids of names with a nonempty entry.
    pub fn names(&self) -> impl Iterator<Item = NameId> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(i, _)| NameId(i as u32))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(BagEntry::is_empty)
    }

    /// Every unordered pair once, as `(i, j, m)` with `i < j`, sorted.
    pub fn pairs(&self) -> Vec<(NameId, NameId, u32)> {
        let mut pairs: Vec<_> = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(i, e)| {
                let i = NameId(i as u32);
                e.iter().filter(move |&(j, _)| i < j).map(move |(j, m)| (i, j, m))
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Writes the documented text dump. Name ids must come from `vocab`.
    pub fn write(&self, vocab: &Vocab, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{BAG_HEADER_PREFIX} {}", self.spec)?;
        for (i, j, m) in self.pairs() {
            writeln!(out, "{}\t{}\t{m}", vocab.name(i), vocab.name(j))?;
        }
        out.flush()
    }
}

/// A bag dump read back from text, still keyed by name strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BagFile {
    pub spec: BagSpec,
    pub pairs: Vec<(String, String, u32)>,
}

impl BagFile {
    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io("<bag>", e))?,
            None => return Err(Error::format("bag", 1, "missing header")),
        };
        let spec = BagSpec::parse_header(header.trim_end())?;
        let mut pairs = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io("<bag>", e))?;
            if line.is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [i, j, m] = fields[..] else {
                return Err(Error::format("bag", line_no, "expected 3 tab-separated fields"));
            };
            let m: u32 = m
                .parse()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| Error::format("bag", line_no, "multiplicity must be a positive integer"))?;
            if i >= j {
                return Err(Error::format("bag", line_no, "pair must be stored as i < j"));
            }
            pairs.push((i.to_owned(), j.to_owned(), m));
        }
        Ok(BagFile { spec, pairs })
    }

    /// A vocabulary holding exactly the names of this bag.
    pub fn vocab(&self) -> Vocab {
        Vocab::from_strings(self.pairs.iter().flat_map(|(i, j, _)| [i.as_str(), j.as_str()]))
    }

    /// Resolves names against `vocab`; every name must be present.
    pub fn into_bag(self, vocab: &Vocab) -> Result<CooccurrenceBag> {
        let lookup = |s: &str| {
            vocab
                .name_id(s)
                .ok_or_else(|| Error::config(format!("bag name `{s}` is not in the corpus")))
        };
        let triples = self
            .pairs
            .iter()
            .map(|(i, j, m)| Ok((lookup(i)?, lookup(j)?, *m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CooccurrenceBag::from_triples(
            vocab.len(),
            self.spec,
            Vec::new(),
            triples,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Interaction;
    use crate::types::Activity;

    fn corpus(users: &[(&str, &[&str])]) -> Corpus {
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

    fn entry(bag: &CooccurrenceBag, c: &Corpus, name: &str) -> Vec<(String, u32)> {
        let v = c.name_vocab();
        bag.entry(v.name_id(name).unwrap())
            .iter()
            .map(|(n, m)| (v.name(n).to_owned(), m))
            .collect()
    }

    #[test]
    fn single_user_single_name_gives_empty_bag() {
        let c = corpus(&[("u1", &["a"])]);
        let bag = build_bag(&c, &BagSpec::new(ActivityFilter::ALL, 0)).unwrap();
        assert!(bag.is_empty());
    }

    #[test]
    fn popularity_orders_by_count_then_name() {
        let c = corpus(&[("u1", &["a", "b"]), ("u2", &["a"])]);
        let v = c.name_vocab();
        let p = popularity(&c);
        assert_eq!(
            p.entries,
            vec![(v.name_id("a").unwrap(), 2), (v.name_id("b").unwrap(), 1)]
        );

        let c = corpus(&[("u1", &["b"]), ("u2", &["a"])]);
        let v = c.name_vocab();
        assert_eq!(
            popularity(&c).entries,
            vec![(v.name_id("a").unwrap(), 1), (v.name_id("b").unwrap(), 1)]
        );
    }

    #[test]
    fn popularity_by_interactions_counts_rows() {
        let c = corpus(&[("u1", &["a", "b", "b", "b"]), ("u2", &["a"])]);
        let v = c.name_vocab();
        let p = popularity_by(&c, PopularityMeasure::Interactions);
        assert_eq!(p.entries[0], (v.name_id("b").unwrap(), 3));
    }

    #[test]
    fn exclusion_removes_names_everywhere() {
        let c = corpus(&[("u1", &["a", "b", "c"]), ("u2", &["a", "c"]), ("u3", &["a", "d"])]);
        let bag = build_bag(&c, &BagSpec::new(ActivityFilter::ALL, 1)).unwrap();
        assert!(entry(&bag, &c, "a").is_empty());
        assert_eq!(entry(&bag, &c, "c"), vec![("b".to_string(), 1)]);
        assert!(entry(&bag, &c, "d").is_empty());
        assert_eq!(bag.excluded(), &[c.name_vocab().name_id("a").unwrap()]);
    }

    #[test]
    fn excluding_every_name_is_rejected() {
        let c = corpus(&[("u1", &["a", "b"])]);
        assert!(build_bag(&c, &BagSpec::new(ActivityFilter::ALL, 2)).is_err());
    }

    #[test]
    fn activity_filter_limits_pairs() {
        let rows = vec![
            Interaction {
                user: "u".into(),
                name: "a".into(),
                activity: Activity::EnterSearch,
                timestamp: 1,
            },
            Interaction {
                user: "u".into(),
                name: "b".into(),
                activity: Activity::LinkSearch,
                timestamp: 2,
            },
            Interaction {
                user: "u".into(),
                name: "c".into(),
                activity: Activity::EnterSearch,
                timestamp: 3,
            },
        ];
        let c = Corpus::from_interactions(&rows);
        let bag = build_bag(&c, &BagSpec::new(ActivityFilter::ENTER_SEARCH, 0)).unwrap();
        assert_eq!(entry(&bag, &c, "a"), vec![("c".to_string(), 1)]);
        assert!(entry(&bag, &c, "b").is_empty());
    }

    #[test]
    fn dump_round_trips() {
        let c = corpus(&[("u1", &["a", "b", "c"]), ("u2", &["b", "c"])]);
        let spec = BagSpec::new(ActivityFilter::SEARCH_AND_DETAILS, 0);
        let bag = build_bag(&c, &spec).unwrap();
        let mut buf = Vec::new();
        bag.write(c.name_vocab(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "#namecf-bag v1 filter=ES,LS,ND exclude=0\na\tb\t1\na\tc\t1\nb\tc\t2\n"
        );
        let file = BagFile::read(buf.as_slice()).unwrap();
        assert_eq!(file.spec, spec);
        let back = file.into_bag(c.name_vocab()).unwrap();
        assert_eq!(back.pairs(), bag.pairs());
    }

    #[test]
    fn dump_rejects_bad_rows() {
        assert!(BagFile::read("#namecf-bag v1 filter=ALL exclude=0\nb\ta\t1\n".as_bytes()).is_err());
        assert!(BagFile::read("#namecf-bag v1 filter=ALL exclude=0\na\tb\t0\n".as_bytes()).is_err());
        assert!(BagFile::read("#namecf-bag v2\n".as_bytes()).is_err());
    }
}
