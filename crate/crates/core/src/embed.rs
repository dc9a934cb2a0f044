//! Word-vector files, tokenization, and fixed-length sentence matrices.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::Tensor2D;
use crate::{Error, Result};

/// Sequence length used when none is configured.
pub const DEFAULT_MAX_LEN: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
    /// Lines in the body that were dropped for having the wrong shape.
    pub skipped_lines: usize,
}

impl VectorTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("vector dimension must be positive".into()));
        }
        Ok(VectorTable {
            dimension,
            entries: HashMap::new(),
            skipped_lines: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn token_count(&self) -> usize {
        self.entries.len()
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Inserts unless the token is already present. Returns whether the
    /// vector was stored.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::Shape(format!(
                "vector of length {} in a table of dimension {}",
                vector.len(),
                self.dimension
            )));
        }
        let token = token.into();
        if self.entries.contains_key(&token) {
            return Ok(false);
        }
        self.entries.insert(token, vector);
        Ok(true)
    }

    /// Tokens in lexicographic order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Writes the table in the text `.vec` layout, tokens sorted.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("{} {}\n", self.token_count(), self.dimension);
        for tok in self.tokens() {
            out.push_str(tok);
            for v in &self.entries[tok] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Parses the text word-vector layout: a `<count> <dimension>` header and
/// one `token v1 .. vd` line per entry. Malformed body lines are counted in
/// [`VectorTable::skipped_lines`]; duplicates keep the first occurrence.
pub fn parse_vector_file(path: impl AsRef<Path>) -> Result<VectorTable> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::MalformedHeader(String::new())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parsed = match fields.as_slice() {
        [count, dim] => count.parse::<usize>().ok().zip(dim.parse::<usize>().ok()),
        _ => None,
    };
    let dimension = match parsed {
        Some((_, d)) if d > 0 => d,
        _ => return Err(Error::MalformedHeader(header)),
    };

    let mut table = VectorTable::new(dimension)?;
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().unwrap_or_default();
        let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        match values {
            Ok(v) if v.len() == dimension && v.iter().all(|x| x.is_finite()) => {
                table.insert(token, v)?;
            }
            _ => table.skipped_lines += 1,
        }
    }
    if table.skipped_lines > 0 {
        log::warn!(
            "{}: skipped {} malformed vector lines",
            path.display(),
            table.skipped_lines
        );
    }
    Ok(table)
}

/// Random Gaussian vectors (σ = 1/√d) for a vocabulary, for fixtures where
/// no pretrained file is available.
pub fn synthetic_vectors<'a>(
    vocabulary: impl IntoIterator<Item = &'a str>,
    dimension: usize,
    seed: u64,
) -> Result<VectorTable> {
    let mut vocab: Vec<&str> = vocabulary.into_iter().collect();
    vocab.sort_unstable();
    vocab.dedup();
    let mut table = VectorTable::new(dimension)?;
    let normal = Normal::new(0.0, 1.0 / (dimension as f64).sqrt()).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for tok in vocab {
        let v = (0..dimension).map(|_| normal.sample(&mut rng)).collect();
        table.insert(tok, v)?;
    }
    Ok(table)
}

const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')'];
const CLITICS: &[&str] = &["s", "re", "ve", "ll", "d", "m"];

fn push_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut core = chunk;
    while let Some(c) = core.chars().next().filter(|c| PUNCT.contains(c)) {
        out.push(c.to_string());
        core = &core[c.len_utf8()..];
    }
    let mut trailing = Vec::new();
    while let Some(c) = core.chars().next_back().filter(|c| PUNCT.contains(c)) {
        trailing.push(c.to_string());
        core = &core[..core.len() - c.len_utf8()];
    }
    if !core.is_empty() {
        split_contraction(core, out);
    }
    out.extend(trailing.into_iter().rev());
}

fn split_contraction(core: &str, out: &mut Vec<String>) {
    let lower = core.to_lowercase();
    let cut = if lower.len() == core.len() && lower.len() > 3 && lower.ends_with("n't") {
        Some(core.len() - 3)
    } else {
        core.rfind('\'').filter(|&pos| {
            pos > 0 && lower.len() == core.len() && CLITICS.contains(&&lower[pos + 1..])
        })
    };
    match cut {
        Some(cut) => {
            push_chunk(&core[..cut], out);
            out.push(core[cut..].to_owned());
        }
        None => out.push(core.to_owned()),
    }
}

/// Whitespace tokenization that detaches edge punctuation and splits
/// English clitics ("doesn't" → "does", "n't"). Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        push_chunk(chunk, &mut out);
    }
    out
}

/// A sentence as an `L × d` matrix. Rows at or beyond `valid_length` are
/// zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    pub tokens: Vec<String>,
    pub matrix: Tensor2D,
    pub valid_length: usize,
}

impl TokenMatrix {
    pub fn zeros(max_len: usize, dimension: usize) -> Self {
        TokenMatrix {
            tokens: Vec::new(),
            matrix: Tensor2D::zeros(max_len, dimension),
            valid_length: 0,
        }
    }

    pub fn max_len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dimension(&self) -> usize {
        self.matrix.cols()
    }
}

/// Looks every token up, truncating to `max_len`. Unknown tokens embed as
/// zero rows but still count toward `valid_length`.
pub fn embed_sentence(tokens: &[String], table: &VectorTable, max_len: usize) -> TokenMatrix {
    assert!(max_len > 0, "max_len must be positive");
    let d = table.dimension();
    let valid_length = tokens.len().min(max_len);
    let mut matrix = Tensor2D::zeros(max_len, d);
    for (i, tok) in tokens.iter().take(valid_length).enumerate() {
        if let Some(v) = table.lookup(tok) {
            matrix.row_mut(i).copy_from_slice(v);
        }
    }
    TokenMatrix {
        tokens: tokens[..valid_length].to_vec(),
        matrix,
        valid_length,
    }
}
