//! Identifiers, vocabularies and the ranked-list type shared by every model.
//!
//! Names and users are interned into dense `u32` ids. A [`Vocab`] always
//! assigns ids in ascending lexicographic order of the underlying strings, so
//! comparing two ids from the same vocabulary is the same as comparing the
//! strings. All "ties by ascending name" rules in the crate rely on this.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NameId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

impl NameId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sorted string interner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from arbitrary strings; duplicates are collapsed.
    pub fn from_strings<I, S>(strings: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut strings: Vec<String> = strings.into_iter().map(Into::into).collect();
        strings.sort_unstable();
        strings.dedup();
        let index = strings
            .iter()
            .enumerate()
            .map(|(id, s)| (s.clone(), id as u32))
            .collect();
        Vocab { strings, index }
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn id(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    pub fn get(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.strings.iter().enumerate().map(|(id, s)| (id as u32, s.as_str()))
    }

    pub fn name_id(&self, s: &str) -> Option<NameId> {
        self.id(s).map(NameId)
    }

    pub fn user_id(&self, s: &str) -> Option<UserId> {
        self.id(s).map(UserId)
    }

    pub fn name(&self, id: NameId) -> &str {
        self.get(id.0)
    }

    pub fn user(&self, id: UserId) -> &str {
        self.get(id.0)
    }
}

/// The five interaction types of the activity log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activity {
    EnterSearch,
    LinkSearch,
    NameDetails,
    LinkCategorySearch,
    AddFavorite,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Activity::EnterSearch,
        Activity::LinkSearch,
        Activity::NameDetails,
        Activity::LinkCategorySearch,
        Activity::AddFavorite,
    ];

    /// Log spelling, e.g. `ENTER_SEARCH`.
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::EnterSearch => "ENTER_SEARCH",
            Activity::LinkSearch => "LINK_SEARCH",
            Activity::NameDetails => "NAME_DETAILS",
            Activity::LinkCategorySearch => "LINK_CATEGORY_SEARCH",
            Activity::AddFavorite => "ADD_FAVORITE",
        }
    }

    /// Two-letter code used in filter specs, e.g. `ES`.
    pub fn code(self) -> &'static str {
        match self {
            Activity::EnterSearch => "ES",
            Activity::LinkSearch => "LS",
            Activity::NameDetails => "ND",
            Activity::LinkCategorySearch => "LCS",
            Activity::AddFavorite => "AF",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = Error;

    /// Accepts either the log spelling or the two-letter code.
    fn from_str(s: &str) -> Result<Self> {
        Activity::ALL
            .into_iter()
            .find(|a| a.as_str() == s || a.code() == s)
            .ok_or_else(|| Error::config(format!("unknown activity `{s}`")))
    }
}

/// A set of activities, used to restrict which interactions a model sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActivityFilter(u8);

impl ActivityFilter {
    pub const ALL: ActivityFilter = ActivityFilter(0b1_1111);
    /// ENTER_SEARCH, LINK_SEARCH and NAME_DETAILS.
    pub const SEARCH_AND_DETAILS: ActivityFilter = ActivityFilter(0b0_0111);
    pub const ENTER_SEARCH: ActivityFilter = ActivityFilter(0b0_0001);

    pub fn from_activities(activities: impl IntoIterator<Item = Activity>) -> Self {
        ActivityFilter(activities.into_iter().fold(0, |acc, a| acc | a.bit()))
    }

    #[inline]
    pub fn contains(self, activity: Activity) -> bool {
        self.0 & activity.bit() != 0
    }

    pub fn activities(self) -> impl Iterator<Item = Activity> {
        Activity::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl fmt::Display for ActivityFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == ActivityFilter::ALL {
            return f.write_str("ALL");
        }
        let codes: Vec<&str> = self.activities().map(Activity::code).collect();
        f.write_str(&codes.join(","))
    }
}

impl Serialize for ActivityFilter {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ActivityFilter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for ActivityFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(ActivityFilter::ALL);
        }
        let activities = s
            .split(',')
            .map(|part| part.trim().parse::<Activity>())
            .collect::<Result<Vec<_>>>()?;
        if activities.is_empty() {
            return Err(Error::config("empty activity filter"));
        }
        Ok(ActivityFilter::from_activities(activities))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scored {
    pub name: NameId,
    pub score: f64,
}

/// An ordered, duplicate-free recommendation list.
///
/// Scores are nonincreasing along the list. The `model` tag records which
/// model or ensemble node produced it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankedList {
    pub model: String,
    pub items: Vec<Scored>,
}

impl RankedList {
    pub fn new(model: impl Into<String>, items: Vec<Scored>) -> Self {
        RankedList {
            model: model.into(),
            items,
        }
    }

    pub fn empty(model: impl Into<String>) -> Self {
        RankedList::new(model, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = NameId> + '_ {
        self.items.iter().map(|s| s.name)
    }

    pub fn contains(&self, name: NameId) -> bool {
        self.items.iter().any(|s| s.name == name)
    }

    /// Checks the list invariants: unique names and nonincreasing scores.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.items.len());
        self.items.iter().all(|s| seen.insert(s.name)) && self.items.windows(2).all(|w| w[0].score >= w[1].score)
    }
}

/// Sorts by score descending, then by ascending name id, and keeps the first `n`.
pub(crate) fn sort_by_score_then_name(items: &mut Vec<Scored>, n: usize) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.name.cmp(&b.name)));
    items.truncate(n);
}
