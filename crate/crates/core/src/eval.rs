//! MAP@k over two held-out names per user.
//!
//! Each held-out name contributes the precision at its position in the list:
//! with positions `p1 < p2`, AP = (1/p1 + 2/p2) / 2. Names missing from the
//! first `k` entries are placed at `k+1`, then `k+2`.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::runs::Run;
use crate::types::{NameId, Vocab};

pub const DEFAULT_CUTOFF: usize = 1000;

/// Average precision of one list for two distinct target names.
pub fn average_precision<T: PartialEq>(list: &[T], targets: (&T, &T), k: usize) -> f64 {
    let head = &list[..list.len().min(k)];
    let find = |t: &T| head.iter().position(|x| x == t).map(|p| p + 1);
    let mut positions: Vec<usize> = [targets.0, targets.1].into_iter().filter_map(find).collect();
    let missing = 2 - positions.len();
    positions.extend((1..=missing).map(|m| k + m));
    positions.sort_unstable();
    positions
        .iter()
        .enumerate()
        .map(|(hits_before, &pos)| (hits_before + 1) as f64 / pos as f64)
        .sum::<f64>()
        / 2.0
}

/// The AP of a list that contains neither target.
pub fn missing_floor(k: usize) -> f64 {
    (1.0 / (k + 1) as f64 + 2.0 / (k + 2) as f64) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub map_at_k: f64,
    pub per_user: BTreeMap<String, f64>,
    pub k: usize,
}

impl EvalResult {
    /// Writes `user<TAB>ap` lines and a trailing `MAP<TAB>value` line.
    pub fn write_report(&self, mut out: impl Write) -> std::io::Result<()> {
        for (user, ap) in &self.per_user {
            writeln!(out, "{user}\t{ap}")?;
        }
        writeln!(out, "MAP\t{}", self.map_at_k)?;
        out.flush()
    }
}

/// Scores a run against held-out names.
///
/// `targets` maps users to their two held-out names in `names`' id space.
/// Users without a list in the run are scored as if their list were empty.
/// A list with a repeated name is rejected.
pub fn map_at_k(
    run: &Run,
    names: &Vocab,
    targets: &BTreeMap<String, (NameId, NameId)>,
    k: usize,
) -> Result<EvalResult> {
    let mut per_user = BTreeMap::new();
    for (user, (a, b)) in targets {
        let ap = match run.list_for(user) {
            Some(list) => {
                let mut seen = HashSet::with_capacity(list.len());
                if let Some(dup) = list.names().find(|n| !seen.insert(*n)) {
                    return Err(Error::DuplicateInList {
                        user: user.clone(),
                        name: names.name(dup).to_owned(),
                    });
                }
                let ids: Vec<NameId> = list.names().collect();
                average_precision(&ids, (a, b), k)
            }
            None => {
                warn!("run `{}` has no list for user `{user}`; scoring as empty", run.model);
                average_precision::<NameId>(&[], (a, b), k)
            }
        };
        per_user.insert(user.clone(), ap);
    }
    let map_at_k = if per_user.is_empty() {
        0.0
    } else {
        per_user.values().sum::<f64>() / per_user.len() as f64
    };
    Ok(EvalResult { map_at_k, per_user, k })
}
