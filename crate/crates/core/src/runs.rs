//! Run files: one ranked list per user, as produced by a model or an
//! ensemble node.
//!
//! ```text
//! user<TAB>name:score,name:score,...
//! ```
//!
//! A line whose user field is `*` holds a list shared by every user without
//! a line of their own; non-personalised models write only that line.
//! Submission files carry the same lines without scores.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{RankedList, Scored, Vocab};

pub const SHARED_USER: &str = "*";
pub const RUN_EXTENSION: &str = "run";

/// Output of one model for a set of users.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Run {
    pub model: String,
    pub lists: BTreeMap<String, RankedList>,
    pub shared: Option<RankedList>,
}

impl Run {
    pub fn new(model: impl Into<String>) -> Self {
        Run {
            model: model.into(),
            ..Run::default()
        }
    }

    /// A run holding one list for everyone.
    pub fn shared(model: impl Into<String>, list: RankedList) -> Self {
        Run {
            model: model.into(),
            lists: BTreeMap::new(),
            shared: Some(list),
        }
    }

    pub fn list_for(&self, user: &str) -> Option<&RankedList> {
        self.lists.get(user).or(self.shared.as_ref())
    }

    pub fn write(&self, names: &Vocab, mut out: impl Write) -> std::io::Result<()> {
        if let Some(list) = &self.shared {
            write_line(&mut out, SHARED_USER, list, names, true)?;
        }
        for (user, list) in &self.lists {
            write_line(&mut out, user, list, names, true)?;
        }
        out.flush()
    }

    /// Writes `user<TAB>name,name,...`, at most `limit` names per user.
    pub fn write_submission(&self, names: &Vocab, limit: usize, mut out: impl Write) -> std::io::Result<()> {
        for (user, list) in &self.lists {
            let mut truncated = list.clone();
            truncated.items.truncate(limit);
            write_line(&mut out, user, &truncated, names, false)?;
        }
        out.flush()
    }
}

fn write_line(
    out: &mut impl Write,
    user: &str,
    list: &RankedList,
    names: &Vocab,
    with_scores: bool,
) -> std::io::Result<()> {
    write!(out, "{user}\t")?;
    for (pos, item) in list.items.iter().enumerate() {
        if pos > 0 {
            out.write_all(b",")?;
        }
        out.write_all(names.name(item.name).as_bytes())?;
        if with_scores {
            write!(out, ":{}", item.score)?;
        }
    }
    writeln!(out)
}

type RawList = Vec<(String, f64)>;

/// Parses a run file into `(user, [(name, score)])` lines.
pub fn read_raw_run(reader: impl BufRead, what: &str) -> Result<Vec<(String, RawList)>> {
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(what, e))?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let (user, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(what, line_no, "missing tab after user"))?;
        let mut items = Vec::new();
        for entry in rest.split(',').filter(|e| !e.is_empty()) {
            let (name, score) = entry
                .rsplit_once(':')
                .ok_or_else(|| Error::format(what, line_no, format!("entry `{entry}` lacks a score")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| Error::format(what, line_no, format!("bad score in `{entry}`")))?;
            items.push((name.to_owned(), score));
        }
        lines.push((user.to_owned(), items));
    }
    Ok(lines)
}

/// Model runs over a shared name vocabulary.
#[derive(Clone, Debug, Default)]
pub struct RunStore {
    names: Vocab,
    runs: BTreeMap<String, Run>,
}

impl RunStore {
    pub fn new(names: Vocab) -> Self {
        RunStore {
            names,
            runs: BTreeMap::new(),
        }
    }

    pub fn names(&self) -> &Vocab {
        &self.names
    }

    pub fn insert(&mut self, run: Run) {
        self.runs.insert(run.model.clone(), run);
    }

    pub fn get(&self, model: &str) -> Option<&Run> {
        self.runs.get(model)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.runs.keys().map(String::as_str)
    }

    /// Every user with a personal list in any run.
    pub fn users(&self) -> Vec<String> {
        let mut users: Vec<String> = self.runs.values().flat_map(|r| r.lists.keys().cloned()).collect();
        users.sort_unstable();
        users.dedup();
        users
    }

    /// Loads every `*.run` file of `dir`; the model id is the file stem.
    pub fn load_dir<'a>(dir: &Path, extra_names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == RUN_EXTENSION))
            .collect();
        paths.sort();
        RunStore::load_files(&paths, extra_names)
    }

    /// Loads run files; `extra_names` are added to the vocabulary so that, for
    /// example, held-out names absent from every run still get an id.
    pub fn load_files<'a>(paths: &[PathBuf], extra_names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut raw = Vec::new();
        for path in paths {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let model = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::config(format!("cannot derive a model id from {}", path.display())))?
                .to_owned();
            raw.push((model, read_raw_run(BufReader::new(file), &path.display().to_string())?));
        }
        let names = Vocab::from_strings(
            raw.iter()
                .flat_map(|(_, lines)| lines.iter().flat_map(|(_, items)| items.iter().map(|(n, _)| n.clone())))
                .chain(extra_names.into_iter().map(str::to_owned)),
        );
        let mut store = RunStore::new(names);
        for (model, lines) in raw {
            let mut run = Run::new(&model);
            for (user, items) in lines {
                let list = RankedList::new(
                    &model,
                    items
                        .into_iter()
                        .map(|(n, score)| Scored {
                            name: store.names.name_id(&n).expect("interned above"),
                            score,
                        })
                        .collect(),
                );
                if user == SHARED_USER {
                    run.shared = Some(list);
                } else {
                    run.lists.insert(user, list);
                }
            }
            store.insert(run);
        }
        Ok(store)
    }

    pub fn write_run(&self, model: &str, out: impl Write) -> Result<()> {
        let run = self.get(model).ok_or_else(|| Error::UnknownLeaf(model.to_owned()))?;
        run.write(&self.names, out)
            .map_err(|e| Error::io(format!("<run {model}>"), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NameId;

    #[test]
    fn run_text_round_trip() {
        let names = Vocab::from_strings(["anna", "bea", "carl"]);
        let mut run = Run::new("m0");
        run.lists.insert(
            "u1".into(),
            RankedList::new(
                "m0",
                vec![
                    Scored {
                        name: NameId(2),
                        score: 3.0,
                    },
                    Scored {
                        name: NameId(0),
                        score: 0.1,
                    },
                ],
            ),
        );
        run.lists.insert("u2".into(), RankedList::empty("m0"));
        run.shared = Some(RankedList::new(
            "m0",
            vec![Scored {
                name: NameId(1),
                score: 1.0 / 3.0,
            }],
        ));
        let mut buf = Vec::new();
        run.write(&names, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "*\tbea:0.3333333333333333\nu1\tcarl:3,anna:0.1\nu2\t\n");

        let raw = read_raw_run(buf.as_slice(), "test").unwrap();
        assert_eq!(
            raw[1],
            (
                "u1".to_string(),
                vec![("carl".to_string(), 3.0), ("anna".to_string(), 0.1)]
            )
        );
        assert_eq!(raw[0].1[0].1, 1.0 / 3.0);
        assert!(raw[2].1.is_empty());

        let mut sub = Vec::new();
        run.write_submission(&names, 1, &mut sub).unwrap();
        assert_eq!(String::from_utf8(sub).unwrap(), "u1\tcarl\nu2\t\n");
    }

    #[test]
    fn shared_list_is_the_fallback() {
        let run = Run::shared(
            "m8",
            RankedList::new(
                "m8",
                vec![Scored {
                    name: NameId(0),
                    score: 1.0,
                }],
            ),
        );
        assert_eq!(run.list_for("anyone").unwrap().len(), 1);
    }

    #[test]
    fn malformed_lines_are_reported() {
        assert!(read_raw_run("u1 anna:1\n".as_bytes(), "t").is_err());
        assert!(read_raw_run("u1\tanna\n".as_bytes(), "t").is_err());
        assert!(read_raw_run("u1\tanna:x\n".as_bytes(), "t").is_err());
    }
}
