use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::corpus::Corpus;

/// Summary of a corpus: names-per-user moments and the two frequency
/// histograms (names per user, users per name).
#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub users: usize,
    pub names: usize,
    pub pairs: usize,
    pub interactions: usize,
    pub mean_names_per_user: f64,
    pub median_names_per_user: f64,
    pub min_names_per_user: usize,
    pub max_names_per_user: usize,
    /// `(|I(u)|, number of users)` ascending by value.
    pub names_per_user: Vec<(usize, usize)>,
    /// `(|U(i)|, number of names)` ascending by value.
    pub users_per_name: Vec<(usize, usize)>,
}

pub fn compute_stats(corpus: &Corpus) -> Result<StatsReport> {
    let mut sizes: Vec<usize> = corpus.histories().map(|h| h.name_set.len()).collect();
    if sizes.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    sizes.sort_unstable();
    let n = sizes.len();
    let mean = sizes.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 {
        sizes[n / 2] as f64
    } else {
        (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0
    };
    Ok(StatsReport {
        users: n,
        names: corpus.num_names(),
        pairs: corpus.pair_count(),
        interactions: corpus.interaction_count(),
        mean_names_per_user: mean,
        median_names_per_user: median,
        min_names_per_user: sizes[0],
        max_names_per_user: sizes[n - 1],
        names_per_user: histogram(sizes.iter().copied()),
        users_per_name: histogram(corpus.names().map(|i| corpus.users_of(i).len())),
    })
}

fn histogram(values: impl Iterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut counts = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

/// Writes `value<TAB>count` lines.
pub fn write_histogram(mut out: impl Write, hist: &[(usize, usize)]) -> std::io::Result<()> {
    for (value, count) in hist {
        writeln!(out, "{value}\t{count}")?;
    }
    out.flush()
}

impl std::fmt::Display for StatsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "users\t{}", self.users)?;
        writeln!(f, "names\t{}", self.names)?;
        writeln!(f, "user_name_pairs\t{}", self.pairs)?;
        writeln!(f, "interactions\t{}", self.interactions)?;
        writeln!(f, "names_per_user_mean\t{:.2}", self.mean_names_per_user)?;
        writeln!(f, "names_per_user_median\t{}", self.median_names_per_user)?;
        writeln!(f, "names_per_user_min\t{}", self.min_names_per_user)?;
        write!(f, "names_per_user_max\t{}", self.max_names_per_user)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::log::Interaction;
    use crate::types::Activity;

    fn corpus_with_sizes(sizes: &[usize]) -> Corpus {
        let rows: Vec<Interaction> = sizes
            .iter()
            .enumerate()
            .flat_map(|(u, &k)| {
                (0..k).map(move |j| Interaction {
                    user: format!("u{u}"),
                    name: format!("n{j}"),
                    activity: Activity::EnterSearch,
                    timestamp: j as u64,
                })
            })
            .collect();
        Corpus::from_interactions(&rows)
    }

    #[test]
    fn single_user_single_name() {
        let s = compute_stats(&corpus_with_sizes(&[1])).unwrap();
        assert_eq!(s.mean_names_per_user, 1.0);
        assert_eq!(s.median_names_per_user, 1.0);
        assert_eq!((s.min_names_per_user, s.max_names_per_user), (1, 1));
    }

    #[test]
    fn mean_and_median_of_one_two_six() {
        let s = compute_stats(&corpus_with_sizes(&[1, 2, 6])).unwrap();
        assert_eq!(s.mean_names_per_user, 3.0);
        assert_eq!(s.median_names_per_user, 2.0);
        assert_eq!(s.names_per_user, vec![(1, 1), (2, 1), (6, 1)]);
        // n0 is shared by all three users, n1 by two, n2..n5 by one.
        assert_eq!(s.users_per_name, vec![(1, 4), (2, 1), (3, 1)]);
        assert_eq!(s.pairs, 9);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            compute_stats(&corpus_with_sizes(&[])),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn histogram_tsv() {
        let mut buf = Vec::new();
        write_histogram(&mut buf, &[(1, 4), (3, 1)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1\t4\n3\t1\n");
    }
}
