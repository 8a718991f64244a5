use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::Activity;

/// One row of the activity log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub name: String,
    pub activity: Activity,
    /// Epoch seconds, UTC.
    pub timestamp: u64,
}

/// Where each field lives in a delimited log row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnMap {
    pub user: usize,
    pub activity: usize,
    pub name: usize,
    pub timestamp: usize,
    pub delimiter: char,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            user: 0,
            activity: 1,
            name: 2,
            timestamp: 3,
            delimiter: '\t',
        }
    }
}

impl ColumnMap {
    fn width(&self) -> usize {
        1 + self.user.max(self.activity).max(self.name).max(self.timestamp)
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Parses a column order such as `user,activity,name,timestamp`.
    /// Columns named `_` (or anything unrecognised) are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut slots = [None; 4];
        for (pos, col) in s.split(',').map(str::trim).enumerate() {
            let slot = match col {
                "user" => 0,
                "activity" => 1,
                "name" => 2,
                "timestamp" => 3,
                _ => continue,
            };
            if slots[slot].replace(pos).is_some() {
                return Err(Error::config(format!("column `{col}` given twice")));
            }
        }
        match slots {
            [Some(user), Some(activity), Some(name), Some(timestamp)] => Ok(ColumnMap {
                user,
                activity,
                name,
                timestamp,
                delimiter: '\t',
            }),
            _ => Err(Error::config(format!(
                "column map `{s}` must name user, activity, name and timestamp"
            ))),
        }
    }
}

/// A row that could not be turned into an [`Interaction`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedLog {
    pub interactions: Vec<Interaction>,
    pub rejects: Vec<Reject>,
}

pub fn parse_activity_log(path: &Path, columns: &ColumnMap) -> Result<ParsedLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_activity_reader(BufReader::new(file), columns).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses a delimited activity log. Blank lines and `#` comments are skipped;
/// a first row that repeats the column labels is treated as a header.
pub fn parse_activity_reader(reader: impl BufRead, columns: &ColumnMap) -> Result<ParsedLog> {
    let mut parsed = ParsedLog::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<activity log>", e))?;
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_row(line, columns) {
            Ok(interaction) => parsed.interactions.push(interaction),
            Err(_) if line_no == 1 && looks_like_header(line, columns) => {}
            Err(reason) => parsed.rejects.push(Reject { line: line_no, reason }),
        }
    }
    Ok(parsed)
}

fn looks_like_header(line: &str, columns: &ColumnMap) -> bool {
    let fields: Vec<&str> = line.split(columns.delimiter).collect();
    fields
        .get(columns.activity)
        .is_some_and(|f| f.trim().eq_ignore_ascii_case("activity"))
}

fn parse_row(line: &str, columns: &ColumnMap) -> std::result::Result<Interaction, String> {
    let fields: Vec<&str> = line.split(columns.delimiter).map(str::trim).collect();
    if fields.len() < columns.width() {
        return Err(format!(
            "expected at least {} fields, found {}",
            columns.width(),
            fields.len()
        ));
    }
    let user = fields[columns.user];
    let name = fields[columns.name];
    if user.is_empty() || name.is_empty() {
        return Err("empty user or name".into());
    }
    if name.contains(',') {
        return Err(format!("name `{name}` contains a comma"));
    }
    let activity = fields[columns.activity]
        .parse::<Activity>()
        .map_err(|_| format!("unknown activity `{}`", fields[columns.activity]))?;
    let timestamp = fields[columns.timestamp]
        .parse::<u64>()
        .map_err(|_| format!("bad timestamp `{}`", fields[columns.timestamp]))?;
    Ok(Interaction {
        user: user.to_owned(),
        name: name.to_owned(),
        activity,
        timestamp,
    })
}

/// The list of valid given names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnownNames {
    names: HashSet<String>,
}

impl KnownNames {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut names = HashSet::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let name = line.trim();
            if !name.is_empty() && !name.starts_with('#') {
                names.insert(name.to_owned());
            }
        }
        Ok(KnownNames { names })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for KnownNames {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        KnownNames {
            names: iter.into_iter().map(Into::into).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ParsedLog {
        parse_activity_reader(text.as_bytes(), &ColumnMap::default()).unwrap()
    }

    #[test]
    fn maps_fields_by_default_column_order() {
        let log = parse("u1\tENTER_SEARCH\tanna\t1331000000\n");
        assert_eq!(
            log.interactions,
            vec![Interaction {
                user: "u1".into(),
                name: "anna".into(),
                activity: Activity::EnterSearch,
                timestamp: 1_331_000_000,
            }]
        );
        assert!(log.rejects.is_empty());
    }

    #[test]
    fn empty_input_gives_nothing() {
        let log = parse("");
        assert!(log.interactions.is_empty());
        assert!(log.rejects.is_empty());
    }

    #[test]
    fn unknown_activity_is_rejected_not_dropped() {
        let log = parse("u1\tFOO\tanna\t1\nu1\tLINK_SEARCH\tbea\t2\n");
        assert_eq!(log.interactions.len(), 1);
        assert_eq!(log.rejects.len(), 1);
        assert_eq!(log.rejects[0].line, 1);
        assert!(log.rejects[0].reason.contains("FOO"));
    }

    #[test]
    fn negative_timestamps_and_short_rows_are_rejected() {
        let log = parse("u1\tENTER_SEARCH\tanna\t-5\nu2\tENTER_SEARCH\n");
        assert!(log.interactions.is_empty());
        assert_eq!(log.rejects.len(), 2);
    }

    #[test]
    fn header_row_is_skipped() {
        let log = parse("user\tactivity\tname\ttime\nu1\tADD_FAVORITE\tanna\t7\n");
        assert_eq!(log.interactions.len(), 1);
        assert!(log.rejects.is_empty());
    }

    #[test]
    fn custom_column_order() {
        let cols: ColumnMap = "timestamp,name,user,activity".parse().unwrap();
        let log = parse_activity_reader("9\tanna\tu1\tNAME_DETAILS\n".as_bytes(), &cols).unwrap();
        assert_eq!(log.interactions[0].user, "u1");
        assert_eq!(log.interactions[0].timestamp, 9);
        assert!("user,name,timestamp".parse::<ColumnMap>().is_err());
        assert!("user,user,name,activity,timestamp".parse::<ColumnMap>().is_err());
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = parse_activity_log(Path::new("/nonexistent/log.tsv"), &ColumnMap::default());
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
