//! Top-N given-name recommendation with a collaborative-filtering ensemble.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`ingest`]: parse activity logs, filter them, build per-user histories
//!   and a leave-last-two validation split.
//! * [`cooccur`]: the bag of co-occurring names with user-level multiplicities.
//! * [`n2n`]: sampling-based Name-to-Name recommendation.
//! * [`neighborhood`]: user-based kNN with Tanimoto or log-likelihood similarity.
//! * [`pagerank`]: global PageRank over the co-occurrence graph.
//! * [`ensemble`]: weighted reciprocal-rank fusion, fill-up and ensemble trees.
//! * [`eval`]: MAP@k with the missing-name penalty.
//! * [`models`]: model presets and a single entry point from definition to run.
//! * [`experiment`]: configuration-driven end-to-end runs.
//! * [`synth`]: synthetic logs with planted clusters.
//!
//! The `book/` directory of the repository walks through each stage; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod cooccur;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod ingest;
pub mod models;
pub mod n2n;
pub mod neighborhood;
pub mod pagerank;
pub mod runs;
pub mod seed;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Activity, ActivityFilter, NameId, RankedList, Scored, UserId, Vocab};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident) => {
            #[doc = include_str!(concat!("../../../book/src/", stringify!($name), ".md"))]
            mod $name {}
        };
    }
    chapter!(ch01_introduction);
    chapter!(ch02_ingest);
    chapter!(ch03_cooccurrence);
    chapter!(ch04_name_to_name);
    chapter!(ch05_neighbourhood);
    chapter!(ch06_pagerank);
    chapter!(ch07_ensemble);
    chapter!(ch08_evaluation);
    chapter!(ch09_pipeline);
}
