use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ingest::log::{Interaction, KnownNames};
use crate::types::{Activity, ActivityFilter, NameId, UserId, Vocab};

pub const CORPUS_HEADER: &str = "#namecf-corpus v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub name: NameId,
    pub activity: Activity,
    pub timestamp: u64,
}

/// A user's interactions in time order plus the set of names they touched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserHistory {
    pub user: UserId,
    /// Nondecreasing timestamps; equal timestamps keep file order.
    pub sequence: Vec<Event>,
    /// Distinct names of `sequence`, sorted by id.
    pub name_set: Vec<NameId>,
}

impl UserHistory {
    fn new(user: UserId, mut sequence: Vec<Event>) -> Self {
        sequence.sort_by_key(|e| e.timestamp);
        let mut name_set: Vec<NameId> = sequence.iter().map(|e| e.name).collect();
        name_set.sort_unstable();
        name_set.dedup();
        UserHistory {
            user,
            sequence,
            name_set,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn contains(&self, name: NameId) -> bool {
        self.name_set.binary_search(&name).is_ok()
    }

    /// Distinct names with at least one interaction under `filter`, sorted.
    pub fn filtered_names(&self, filter: ActivityFilter) -> Vec<NameId> {
        if filter == ActivityFilter::ALL {
            return self.name_set.clone();
        }
        let mut names: Vec<NameId> = self
            .sequence
            .iter()
            .filter(|e| filter.contains(e.activity))
            .map(|e| e.name)
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }
}

/// Immutable, indexed view of a preprocessed activity log.
///
/// User and name ids come from sorted vocabularies. A user or name may exist
/// in a vocabulary without any interactions (for example after a validation
/// split removed them); such entries are not counted as members of the user
/// set or the name set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    users: Vocab,
    names: Vocab,
    histories: Vec<UserHistory>,
    inverted: Vec<Vec<UserId>>,
}

impl Corpus {
    /// Builds a corpus from interactions without any filtering.
    pub fn from_interactions<'a>(interactions: impl IntoIterator<Item = &'a Interaction>) -> Self {
        let interactions: Vec<&Interaction> = interactions.into_iter().collect();
        let users = Vocab::from_strings(interactions.iter().map(|i| i.user.as_str()));
        let names = Vocab::from_strings(interactions.iter().map(|i| i.name.as_str()));
        let mut events = vec![Vec::new(); users.len()];
        for i in interactions {
            let user = users.id(&i.user).expect("user interned above");
            let name = names.name_id(&i.name).expect("name interned above");
            events[user as usize].push(Event {
                name,
                activity: i.activity,
                timestamp: i.timestamp,
            });
        }
        Corpus::from_parts(users, names, events)
    }

    /// Assembles a corpus over fixed vocabularies. `events[u]` holds user `u`'s
    /// interactions in source order.
    pub(crate) fn from_parts(users: Vocab, names: Vocab, events: Vec<Vec<Event>>) -> Self {
        debug_assert_eq!(users.len(), events.len());
        let histories: Vec<UserHistory> = events
            .into_iter()
            .enumerate()
            .map(|(u, seq)| UserHistory::new(UserId(u as u32), seq))
            .collect();
        let mut inverted = vec![Vec::new(); names.len()];
        for h in &histories {
            for &name in &h.name_set {
                inverted[name.index()].push(h.user);
            }
        }
        Corpus {
            users,
            names,
            histories,
            inverted,
        }
    }

    pub fn user_vocab(&self) -> &Vocab {
        &self.users
    }

    pub fn name_vocab(&self) -> &Vocab {
        &self.names
    }

    pub fn history(&self, user: UserId) -> &UserHistory {
        &self.histories[user.index()]
    }

    pub fn histories(&self) -> impl Iterator<Item = &UserHistory> {
        self.histories.iter().filter(|h| !h.is_empty())
    }

    /// Users with at least one interaction.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.histories().map(|h| h.user)
    }

    pub fn num_users(&self) -> usize {
        self.histories().count()
    }

    /// Names with at least one interaction.
    pub fn names(&self) -> impl Iterator<Item = NameId> + '_ {
        self.inverted
            .iter()
            .enumerate()
            .filter(|(_, users)| !users.is_empty())
            .map(|(i, _)| NameId(i as u32))
    }

    pub fn num_names(&self) -> usize {
        self.inverted.iter().filter(|u| !u.is_empty()).count()
    }

    /// Users who interacted with `name`, sorted by id.
    pub fn users_of(&self, name: NameId) -> &[UserId] {
        &self.inverted[name.index()]
    }

    /// Number of distinct (user, name) pairs, i.e. the sum of |I(u)|.
    pub fn pair_count(&self) -> usize {
        self.histories.iter().map(|h| h.name_set.len()).sum()
    }

    pub fn interaction_count(&self) -> usize {
        self.histories.iter().map(|h| h.sequence.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_users() == 0
    }

    pub fn to_interactions(&self) -> Vec<Interaction> {
        self.histories()
            .flat_map(|h| {
                let user = self.users.user(h.user);
                h.sequence.iter().map(move |e| Interaction {
                    user: user.to_owned(),
                    name: self.names.name(e.name).to_owned(),
                    activity: e.activity,
                    timestamp: e.timestamp,
                })
            })
            .collect()
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{CORPUS_HEADER}")?;
        for h in self.histories() {
            let user = self.users.user(h.user);
            for e in &h.sequence {
                writeln!(
                    out,
                    "{user}\t{}\t{}\t{}",
                    self.names.name(e.name),
                    e.activity,
                    e.timestamp
                )?;
            }
        }
        out.flush()
    }

    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut interactions = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<corpus>", e))?;
            let line_no = idx + 1;
            if line_no == 1 {
                if line.trim_end() != CORPUS_HEADER {
                    return Err(Error::format("corpus", 1, format!("expected `{CORPUS_HEADER}`")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [user, name, activity, timestamp] = fields[..] else {
                return Err(Error::format("corpus", line_no, "expected 4 tab-separated fields"));
            };
            interactions.push(Interaction {
                user: user.to_owned(),
                name: name.to_owned(),
                activity: activity
                    .parse()
                    .map_err(|e: Error| Error::format("corpus", line_no, e.to_string()))?,
                timestamp: timestamp
                    .parse()
                    .map_err(|_| Error::format("corpus", line_no, "bad timestamp"))?,
            });
        }
        Ok(Corpus::from_interactions(&interactions))
    }
}

/// Drops LINK_CATEGORY_SEARCH interactions and interactions with names
/// outside `known`, then indexes the survivors.
pub fn preprocess(interactions: &[Interaction], known: &KnownNames) -> Corpus {
    Corpus::from_interactions(
        interactions
            .iter()
            .filter(|i| i.activity != Activity::LinkCategorySearch && known.contains(&i.name)),
    )
}

/// Counts from a preprocessing run, for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub input_rows: usize,
    pub retained_rows: usize,
    pub pairs: usize,
    pub users: usize,
    pub names: usize,
}

impl PreprocessSummary {
    pub fn new(input_rows: usize, corpus: &Corpus) -> Self {
        PreprocessSummary {
            input_rows,
            retained_rows: corpus.interaction_count(),
            pairs: corpus.pair_count(),
            users: corpus.num_users(),
            names: corpus.num_names(),
        }
    }
}
