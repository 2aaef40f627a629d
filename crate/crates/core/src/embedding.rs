//! Frozen text vectors for node texts and shopping interests.
//!
//! Providers map a text to the mean of its token vectors (boundary tokens
//! included). Two providers exist: a seeded hash embedder that needs no
//! model files, and a lookup table loaded from an exported embedding file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub const EMBEDDING_FILE_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot pool an empty token list")]
    NoTokens,
    #[error("no embedding for key {0:?}")]
    KeyMissing(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean of a text's token vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledText<T> {
    pub vector: Vec<T>,
}

impl<T: Scalar> PooledText<T> {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Source of pooled text vectors. Implementations are deterministic and
/// read-only after construction.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<PooledText<f64>, EmbeddingError>;
}

/// Lookup key for a text: lowercase with whitespace runs collapsed.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Arithmetic mean of the given vectors.
pub fn pool_tokens<T: Scalar>(tokens: &[Vec<T>]) -> Result<PooledText<T>, EmbeddingError> {
    let first = tokens.first().ok_or(EmbeddingError::NoTokens)?;
    let dim = first.len();
    let mut acc = vec![T::zero(); dim];
    for t in tokens {
        if t.len() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: dim,
                found: t.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(t) {
            *a += x;
        }
    }
    let inv = T::one() / T::lit(tokens.len() as f64);
    Ok(PooledText {
        vector: acc.into_iter().map(|a| a * inv).collect(),
    })
}

const BOUNDARY_START: &str = "\u{1}[start]";
const BOUNDARY_END: &str = "\u{1}[end]";

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn token_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token.as_bytes()) ^ splitmix64(seed));
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v[0] = 1.0;
    }
    v
}

/// Token vectors of `text`: start boundary, one unit-norm vector per
/// lowercase whitespace token, end boundary.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim >= 1, "embedding dimension must be positive");
    let key = normalize_key(text);
    let mut out = Vec::with_capacity(key.split(' ').count() + 2);
    out.push(token_vector(BOUNDARY_START, dim, seed));
    out.extend(
        key.split_whitespace()
            .map(|tok| token_vector(tok, dim, seed)),
    );
    out.push(token_vector(BOUNDARY_END, dim, seed));
    out
}

/// Seeded stand-in for a language model: pools [`hash_embed`] vectors.
#[derive(Clone, Debug)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<PooledText<f64>, EmbeddingError> {
        pool_tokens(&hash_embed(text, self.dim, self.seed))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub version: u64,
    pub dim: usize,
    pub model: String,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    key: String,
    vec: Vec<f32>,
}

#[derive(Clone, Debug)]
pub enum MissingKeyPolicy {
    Strict,
    /// Fall back to hash vectors (logged) for unseen keys.
    Lenient(HashEmbedder),
}

/// Pooled vectors keyed by normalized text.
#[derive(Clone, Debug)]
pub struct FileEmbeddings {
    pub header: EmbeddingHeader,
    table: HashMap<String, Vec<f32>>,
    policy: MissingKeyPolicy,
}

impl FileEmbeddings {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.table.contains_key(&normalize_key(text))
    }

    pub fn get_f32(&self, text: &str) -> Option<&[f32]> {
        self.table.get(&normalize_key(text)).map(Vec::as_slice)
    }

    pub fn with_policy(mut self, policy: MissingKeyPolicy) -> Self {
        self.policy = policy;
        self
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn dim(&self) -> usize {
        self.header.dim
    }

    fn embed(&self, text: &str) -> Result<PooledText<f64>, EmbeddingError> {
        let key = normalize_key(text);
        match self.table.get(&key) {
            Some(v) => Ok(PooledText {
                vector: v.iter().map(|&x| f64::from(x)).collect(),
            }),
            None => match &self.policy {
                MissingKeyPolicy::Strict => Err(EmbeddingError::KeyMissing(key)),
                MissingKeyPolicy::Lenient(fallback) => {
                    log::warn!("no embedding for {key:?}; using hash fallback");
                    fallback.embed(&key)
                }
            },
        }
    }
}

pub fn load_embedding_file(
    path: impl AsRef<Path>,
    policy: MissingKeyPolicy,
) -> Result<FileEmbeddings, EmbeddingError> {
    read_embeddings(File::open(path)?, policy)
}

pub fn read_embeddings<R: Read>(
    r: R,
    policy: MissingKeyPolicy,
) -> Result<FileEmbeddings, EmbeddingError> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let header: EmbeddingHeader = loop {
        let Some((i, line)) = lines.next() else {
            return Err(EmbeddingError::Format {
                line: 1,
                message: "missing header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str(&line).map_err(|e| EmbeddingError::Format {
            line: i + 1,
            message: format!("header: {e}"),
        })?;
    };
    if header.version != EMBEDDING_FILE_VERSION {
        return Err(EmbeddingError::Format {
            line: 1,
            message: format!("unsupported version {}", header.version),
        });
    }
    if let MissingKeyPolicy::Lenient(h) = &policy {
        if h.dim != header.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: header.dim,
                found: h.dim,
            });
        }
    }
    let mut table = HashMap::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        if rec.vec.len() != header.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: header.dim,
                found: rec.vec.len(),
            });
        }
        if rec.vec.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::Format {
                line: i + 1,
                message: "non-finite vector entry".into(),
            });
        }
        table.insert(normalize_key(&rec.key), rec.vec);
    }
    Ok(FileEmbeddings {
        header,
        table,
        policy,
    })
}

/// Writes an embedding file; keys are normalized on the way out.
pub fn write_embeddings<W: Write>(
    w: W,
    model: &str,
    dim: usize,
    entries: impl IntoIterator<Item = (String, Vec<f32>)>,
) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(w);
    let header = EmbeddingHeader {
        version: EMBEDDING_FILE_VERSION,
        dim,
        model: model.to_string(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for (key, vec) in entries {
        if vec.len() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: dim,
                found: vec.len(),
            });
        }
        let rec = EmbeddingRecord {
            key: normalize_key(&key),
            vec,
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_is_the_mean() {
        let v = vec![0.25f64, -1.0, 3.0];
        assert_eq!(pool_tokens(&[v.clone(), v.clone()]).unwrap().vector, v);
        assert_eq!(
            pool_tokens(&[vec![1.0f64, 0.0], vec![0.0, 1.0]])
                .unwrap()
                .vector,
            vec![0.5, 0.5]
        );
        assert!(matches!(
            pool_tokens(&[vec![1.0f64], vec![1.0, 2.0]]),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            pool_tokens::<f64>(&[]),
            Err(EmbeddingError::NoTokens)
        ));
    }

    #[test]
    fn hash_embedding_is_deterministic_and_unit_norm() {
        let a = hash_embed("tent", 16, 7);
        assert_eq!(a, hash_embed("tent", 16, 7));
        assert_eq!(a.len(), 3);
        let b = hash_embed("Tent  TENT", 16, 7);
        assert_eq!(b.len(), 4);
        assert_eq!(b[1], b[2]);
        assert_eq!(b[1], a[1]);
        for v in a.iter().chain(&b) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
        assert_ne!(hash_embed("tent", 16, 8)[1], a[1]);
    }

    #[test]
    fn hash_embedding_golden_values() {
        // pinned so that a change of hash or RNG stream is caught
        let v = &hash_embed("tent", 4, 42)[1];
        let golden = [
            -0.7668332602462693,
            0.07905817952386791,
            -0.6365249665448015,
            0.023505790682056334,
        ];
        for (a, b) in v.iter().zip(golden) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn key_normalization() {
        assert_eq!(normalize_key("  Sleeping\tBAG \n"), "sleeping bag");
    }

    fn file_with_tent() -> Vec<u8> {
        let mut buf = Vec::new();
        write_embeddings(
            &mut buf,
            "toy",
            3,
            vec![("tent".to_string(), vec![0.1f32, -2.5, 1e-7])],
        )
        .unwrap();
        buf
    }

    #[test]
    fn file_provider_lookup_and_normalization() {
        let p = read_embeddings(file_with_tent().as_slice(), MissingKeyPolicy::Strict).unwrap();
        let v = p.embed("tent").unwrap().vector;
        assert_eq!(v, vec![f64::from(0.1f32), -2.5, f64::from(1e-7f32)]);
        assert_eq!(p.embed("TENT  ").unwrap(), p.embed("tent").unwrap());
        assert!(matches!(p.embed("unseen"), Err(EmbeddingError::KeyMissing(k)) if k == "unseen"));
    }

    #[test]
    fn lenient_provider_falls_back_to_hash() {
        let p = read_embeddings(
            file_with_tent().as_slice(),
            MissingKeyPolicy::Lenient(HashEmbedder::new(3, 1)),
        )
        .unwrap();
        assert_eq!(
            p.embed("unseen").unwrap(),
            HashEmbedder::new(3, 1).embed("unseen").unwrap()
        );
        assert!(read_embeddings(
            file_with_tent().as_slice(),
            MissingKeyPolicy::Lenient(HashEmbedder::new(4, 1))
        )
        .is_err());
    }

    #[test]
    fn malformed_files_rejected() {
        let bad_dim = b"{\"version\":1,\"dim\":2,\"model\":\"m\"}\n{\"key\":\"a\",\"vec\":[1.0]}\n";
        assert!(matches!(
            read_embeddings(&bad_dim[..], MissingKeyPolicy::Strict),
            Err(EmbeddingError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        let bad_json = b"{\"version\":1,\"dim\":1,\"model\":\"m\"}\n{\"key\":\"a\",\"vec\":[1.0\n";
        assert!(matches!(
            read_embeddings(&bad_json[..], MissingKeyPolicy::Strict),
            Err(EmbeddingError::Format { line: 2, .. })
        ));
        assert!(read_embeddings(&b""[..], MissingKeyPolicy::Strict).is_err());
    }
}
