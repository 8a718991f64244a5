use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use log::warn;

use crate::error::{Error, Result};
use crate::ingest::corpus::{Corpus, Event, UserHistory};
use crate::types::{Activity, NameId, UserId};

pub const SPLIT_HEADER: &str = "#namecf-split v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Last two distinct ENTER_SEARCH names of every user that has them.
    Strict,
    /// Last two distinct names of each listed user, any activity.
    Relaxed(BTreeSet<String>),
}

/// A training corpus plus each evaluated user's two held-out names.
#[derive(Clone, Debug)]
pub struct EvalSplit {
    /// Shares the user and name vocabularies of the split corpus.
    pub train: Corpus,
    /// `(most recent, second most recent)` held-out names.
    pub targets: BTreeMap<UserId, (NameId, NameId)>,
    /// Users that were requested (relaxed mode) but could not be split.
    pub skipped: Vec<String>,
}

/// Builds a leave-last-two validation split.
///
/// Every interaction with a held-out name is removed from that user's
/// training history. The corpus is expected to be preprocessed already, so
/// every name in it is a known name.
pub fn split_validation(corpus: &Corpus, mode: &SplitMode) -> EvalSplit {
    let users = corpus.user_vocab();
    let mut targets = BTreeMap::new();
    let mut skipped = Vec::new();

    match mode {
        SplitMode::Strict => {
            for h in corpus.histories() {
                if let Some(pair) = last_two(h, |e| e.activity == Activity::EnterSearch) {
                    targets.insert(h.user, pair);
                }
            }
        }
        SplitMode::Relaxed(requested) => {
            for user in requested {
                let pair = users
                    .user_id(user)
                    .and_then(|id| last_two(corpus.history(id), |_| true).map(|p| (id, p)));
                match pair {
                    Some((id, pair)) => {
                        targets.insert(id, pair);
                    }
                    None => {
                        warn!("user `{user}` has fewer than two distinct names; skipped");
                        skipped.push(user.clone());
                    }
                }
            }
        }
    }

    let events: Vec<Vec<Event>> = (0..users.len())
        .map(|u| {
            let h = corpus.history(UserId(u as u32));
            match targets.get(&h.user) {
                Some(&(a, b)) => h
                    .sequence
                    .iter()
                    .filter(|e| e.name != a && e.name != b)
                    .copied()
                    .collect(),
                None => h.sequence.clone(),
            }
        })
        .collect();

    EvalSplit {
        train: Corpus::from_parts(users.clone(), corpus.name_vocab().clone(), events),
        targets,
        skipped,
    }
}

fn last_two(history: &UserHistory, eligible: impl Fn(&Event) -> bool) -> Option<(NameId, NameId)> {
    let mut picked: Option<NameId> = None;
    for e in history.sequence.iter().rev().filter(|e| eligible(e)) {
        match picked {
            None => picked = Some(e.name),
            Some(first) if first != e.name => return Some((first, e.name)),
            Some(_) => {}
        }
    }
    None
}

impl EvalSplit {
    /// Writes the held-out names as `user<TAB>name_a<TAB>name_b` lines.
    pub fn write_targets(&self, mut out: impl Write) -> std::io::Result<()> {
        let users = self.train.user_vocab();
        let names = self.train.name_vocab();
        writeln!(out, "{SPLIT_HEADER}")?;
        for (&user, &(a, b)) in &self.targets {
            writeln!(out, "{}\t{}\t{}", users.user(user), names.name(a), names.name(b))?;
        }
        out.flush()
    }
}

/// Held-out names keyed by user string, as stored in a split file.
pub type Targets = BTreeMap<String, (String, String)>;

pub fn read_targets(reader: impl BufRead) -> Result<Targets> {
    let mut targets = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<split>", e))?;
        let line_no = idx + 1;
        if line_no == 1 {
            if line.trim_end() != SPLIT_HEADER {
                return Err(Error::format("split", 1, format!("expected `{SPLIT_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [user, a, b] = fields[..] else {
            return Err(Error::format("split", line_no, "expected 3 tab-separated fields"));
        };
        if a == b {
            return Err(Error::format("split", line_no, "held-out names must differ"));
        }
        targets.insert(user.to_owned(), (a.to_owned(), b.to_owned()));
    }
    Ok(targets)
}
