//! Synthetic activity logs with planted co-occurrence clusters.
//!
//! Names are split into contiguous clusters and every user belongs to one
//! cluster. Each name a user touches comes from a skewed distribution over
//! their own cluster, or with probability `noise` uniformly from all names.
//! The final two names of every user are ENTER_SEARCH rows, so a strict
//! split holds them out. A few rows use unknown names or the category-link
//! activity, which preprocessing must drop.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Interaction;
use crate::seed::rng_for;
use crate::types::Activity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub clusters: usize,
    pub users: usize,
    pub names: usize,
    /// Probability of drawing a name uniformly instead of from the cluster.
    pub noise: f64,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.users == 0 {
            return Err(Error::config("clusters and users must be positive"));
        }
        // Every user needs up to ten distinct names from their cluster.
        if self.names < self.clusters * 10 {
            return Err(Error::config("need at least 10 names per cluster"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::config("noise must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub interactions: Vec<Interaction>,
    pub known: Vec<String>,
    pub name_cluster: BTreeMap<String, usize>,
    pub user_cluster: BTreeMap<String, usize>,
}

const BASE_TIME: u64 = 1_331_000_000;
const MIN_HISTORY: usize = 2;
const MAX_HISTORY: usize = 8;

pub fn generate_synthetic(params: &SynthParams) -> Result<SyntheticData> {
    params.validate()?;
    let per_cluster = params.names / params.clusters;
    let cluster_of = |name: usize| (name / per_cluster).min(params.clusters - 1);
    let members: Vec<Vec<usize>> = (0..params.clusters)
        .map(|c| (0..params.names).filter(|&n| cluster_of(n) == c).collect())
        .collect();
    // Skewed popularity inside a cluster: weight 1/(rank+1).
    let cumulative: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            let mut total = 0.0;
            (0..m.len())
                .map(|r| {
                    total += 1.0 / (r + 1) as f64;
                    total
                })
                .collect()
        })
        .collect();
    let name_str = |n: usize| format!("n{n:04}");

    let mut rng = rng_for(params.seed, "synthetic");
    let mut interactions = Vec::new();
    let mut user_cluster = BTreeMap::new();
    for u in 0..params.users {
        let user = format!("user{u:05}");
        let cluster = u % params.clusters;
        user_cluster.insert(user.clone(), cluster);

        let history_len = rng.random_range(MIN_HISTORY..=MAX_HISTORY);
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < history_len + 2 {
            let name = if rng.random::<f64>() < params.noise {
                rng.random_range(0..params.names)
            } else {
                let cum = &cumulative[cluster];
                let x = rng.random::<f64>() * cum[cum.len() - 1];
                members[cluster][cum.partition_point(|&c| c <= x).min(cum.len() - 1)]
            };
            if !chosen.contains(&name) {
                chosen.push(name);
            }
        }

        let mut clock = BASE_TIME + (u as u64) * 10_000;
        let mut push = |name: String, activity: Activity, clock: &mut u64| {
            *clock += 30;
            interactions.push(Interaction {
                user: user.clone(),
                name,
                activity,
                timestamp: *clock,
            });
        };
        for &name in &chosen[..history_len] {
            for _ in 0..rng.random_range(1..=3) {
                push(name_str(name), random_activity(&mut rng), &mut clock);
            }
        }
        if rng.random::<f64>() < 0.1 {
            push(name_str(chosen[0]), Activity::LinkCategorySearch, &mut clock);
        }
        if rng.random::<f64>() < 0.05 {
            push(format!("unknown{u:05}"), Activity::EnterSearch, &mut clock);
        }
        for &name in &chosen[history_len..] {
            push(name_str(name), Activity::EnterSearch, &mut clock);
        }
    }

    Ok(SyntheticData {
        interactions,
        known: (0..params.names).map(name_str).collect(),
        name_cluster: (0..params.names).map(|n| (name_str(n), cluster_of(n))).collect(),
        user_cluster,
    })
}

fn random_activity(rng: &mut ChaCha8Rng) -> Activity {
    match rng.random::<f64>() {
        x if x < 0.55 => Activity::EnterSearch,
        x if x < 0.75 => Activity::LinkSearch,
        x if x < 0.95 => Activity::NameDetails,
        _ => Activity::AddFavorite,
    }
}

impl SyntheticData {
    /// Writes the log in the default column order.
    pub fn write_log(&self, mut out: impl Write) -> std::io::Result<()> {
        for i in &self.interactions {
            writeln!(out, "{}\t{}\t{}\t{}", i.user, i.activity, i.name, i.timestamp)?;
        }
        out.flush()
    }

    pub fn write_known(&self, mut out: impl Write) -> std::io::Result<()> {
        for name in &self.known {
            writeln!(out, "{name}")?;
        }
        out.flush()
    }

    /// Writes `log.tsv` and `known.txt` into `dir`, returning their paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let log = dir.join("log.tsv");
        let known = dir.join("known.txt");
        let create = |p: &Path| {
            fs::File::create(p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        self.write_log(create(&log)?).map_err(|e| Error::io(&log, e))?;
        self.write_known(create(&known)?).map_err(|e| Error::io(&known, e))?;
        Ok((log, known))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(noise: f64, seed: u64) -> SynthParams {
        SynthParams {
            clusters: 2,
            users: 20,
            names: 40,
            noise,
            seed,
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_synthetic(&params(0.2, 7)).unwrap().write_log(&mut a).unwrap();
        generate_synthetic(&params(0.2, 7)).unwrap().write_log(&mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_synthetic(&params(0.2, 8)).unwrap().write_log(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_degenerate_params() {
        assert!(generate_synthetic(&SynthParams {
            names: 5,
            ..params(0.0, 1)
        })
        .is_err());
        assert!(generate_synthetic(&SynthParams {
            noise: 1.5,
            ..params(0.0, 1)
        })
        .is_err());
        assert!(generate_synthetic(&SynthParams {
            users: 0,
            ..params(0.0, 1)
        })
        .is_err());
    }
}
