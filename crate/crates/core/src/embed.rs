//! Word embedding tables.
//!
//! Supports the whitespace text format `word v1 … vd` (one word per line) and
//! a deterministic seeded table over a closed vocabulary for runs where no
//! pretrained file is configured. Seeded vectors are derived per word from
//! `fnv1a64(word) ^ seed`, so the table is identical regardless of the order
//! words were inserted.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{mean_of, Scalar};
use crate::rng::{fnv1a64, Rng};
use crate::text::lower_tokens;

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<S> {
    dim: usize,
    table: BTreeMap<String, Vec<S>>,
}

impl<S: Scalar> Embeddings<S> {
    pub fn new(dim: usize) -> Self {
        Embeddings {
            dim,
            table: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<S>) {
        assert_eq!(vector.len(), self.dim, "embedding dimension mismatch");
        self.table.insert(word.into().to_lowercase(), vector);
    }

    /// Lookup is case-insensitive; `None` marks an out-of-vocabulary word.
    pub fn get(&self, word: &str) -> Option<&[S]> {
        self.table.get(&word.to_lowercase()).map(|v| v.as_slice())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(|s| s.as_str())
    }

    /// Deterministic random table over a closed vocabulary. Each word's
    /// vector depends only on (word, seed), components uniform in [-1, 1]
    /// scaled by 1/sqrt(dim).
    pub fn seeded_from_vocab<'a, I>(words: I, dim: usize, seed: u64) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut emb = Embeddings::new(dim);
        let scale = 1.0 / (dim as f64).sqrt();
        for word in words {
            let lower = word.to_lowercase();
            if emb.table.contains_key(&lower) {
                continue;
            }
            let mut rng = Rng::seed_from_u64(fnv1a64(lower.as_bytes()) ^ seed);
            let v: Vec<S> = (0..dim)
                .map(|_| rng.uniform_in::<S>(-scale, scale))
                .collect();
            emb.table.insert(lower, v);
        }
        emb
    }

    /// Mean of in-vocabulary token vectors over the lowercased whitespace
    /// tokens of `text`; the zero vector when every token is OOV.
    pub fn mean_embedding(&self, text: &str) -> Vec<S> {
        let toks = lower_tokens(text);
        let rows: Vec<&[S]> = toks.iter().filter_map(|t| self.get(t)).collect();
        mean_of(&rows, self.dim)
    }

    /// True when `text` has at least one in-vocabulary token.
    pub fn covers(&self, text: &str) -> bool {
        lower_tokens(text).iter().any(|t| self.get(t).is_some())
    }

    /// Load `word v1 … vd` lines. The dimension is inferred from the first
    /// line and enforced on the rest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut table = BTreeMap::new();
        let mut dim = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: "empty embedding line".into(),
            })?;
            let values: Vec<S> = parts
                .map(|p| {
                    p.parse::<f64>()
                        .map(crate::num::sc::<S>)
                        .map_err(|e| Error::Parse {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            message: format!("bad component `{p}`: {e}"),
                        })
                })
                .collect::<Result<_>>()?;
            if dim == 0 {
                dim = values.len();
            }
            if values.len() != dim || dim == 0 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected {dim} components, found {}", values.len()),
                });
            }
            table.insert(word.to_lowercase(), values);
        }
        if dim == 0 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: "embedding file is empty".into(),
            });
        }
        Ok(Embeddings { dim, table })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (word, vec) in &self.table {
            write!(file, "{word}")?;
            for v in vec {
                write!(file, " {}", v.to_f64().unwrap())?;
            }
            writeln!(file)?;
        }
        Ok(())
    }
}
