//! Activity-log parsing, preprocessing, corpus statistics and the
//! leave-last-two validation split.

mod corpus;
mod log;
mod split;
mod stats;

pub use self::corpus::{preprocess, Corpus, Event, PreprocessSummary, UserHistory, CORPUS_HEADER};
pub use self::log::{parse_activity_log, parse_activity_reader, ColumnMap, Interaction, KnownNames, ParsedLog, Reject};
pub use self::split::{read_targets, split_validation, EvalSplit, SplitMode, Targets, SPLIT_HEADER};
pub use self::stats::{compute_stats, write_histogram, StatsReport};
