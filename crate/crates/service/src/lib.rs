//! Read-only HTTP interface over an explained, sortable corpus.
//!
//! The store is loaded once and never mutated, so every handler is a pure
//! function of the request.

mod query;
mod routes;

pub use query::{get_segment, get_segments, FilterSpec, Page, QueryError, SegmentQuery, SegmentView, TokenView};
pub use routes::{router, serve};

use std::path::Path;

use mtdiag_core::explainer::{read_explanations, Explanation, Method};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub checkpoint_checksum: Option<String>,
    pub method: Option<Method>,
    pub corpus_size: usize,
    pub config_checksum: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Store {
    explanations: Vec<Explanation>,
    stats: Option<Vec<u8>>,
}

impl Store {
    pub fn new(explanations: Vec<Explanation>, stats: Option<Vec<u8>>) -> Self {
        Store { explanations, stats }
    }

    /// Reads the explanation store and, if the file exists, the raw stats
    /// report.
    pub fn load(explanations: impl AsRef<Path>, stats: impl AsRef<Path>) -> mtdiag_core::Result<Self> {
        let explanations = read_explanations(explanations)?;
        let path = stats.as_ref();
        let stats = match std::fs::read(path) {
            Ok(bytes) => Some(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(mtdiag_core::Error::io(path, e)),
        };
        Ok(Store::new(explanations, stats))
    }

    pub fn explanations(&self) -> &[Explanation] {
        &self.explanations
    }

    pub fn stats(&self) -> Option<&[u8]> {
        self.stats.as_deref()
    }

    pub fn meta(&self) -> Meta {
        let first = self.explanations.first();
        Meta {
            checkpoint_checksum: first.map(|e| e.checkpoint_checksum.clone()),
            method: first.map(|e| e.method),
            corpus_size: self.explanations.len(),
            config_checksum: first.and_then(|e| e.config_checksum.clone()),
        }
    }
}
