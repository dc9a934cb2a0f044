//! Discriminating human from machine translations and explaining the
//! decisions as token-level evidence.
//!
//! The pipeline has three stages: train a three-branch convolutional
//! discriminator ([`classifier`]), sort a held-out corpus by the
//! discriminator's confidence ([`sorter`]), and propagate the decision back
//! onto the input tokens ([`explainer`]). Corpus-level frequency contrasts
//! with χ² tests ([`stats`]) confirm what the heatmaps suggest.

pub mod classifier;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod explainer;
pub mod nn;
pub mod sorter;
pub mod stats;

pub use error::{Error, Result};

/// Which translation input holds a given text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Side {
        if i == 0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Hex-encoded SHA-256 of a byte string.
pub fn checksum(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
