//! Deterministic test embedder.
//!
//! Each lowercased word token hashes to a fixed pseudo-random vector; token
//! vectors are summed and the result L2-normalized. Texts sharing tokens get
//! proportionally higher cosine similarity, which is enough lexical signal to
//! drive retrieval offline with zero external dependencies.

use super::{Embedder, ProviderError};

/// Seeded token-hash embedder. Same text always maps to the same vector for a
/// given `(dimension, seed)` pair, on any platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dimension: 384,
            seed: 42,
        }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_vector_into(&self, token: &str, acc: &mut [f64]) {
        let mut state = fnv1a64(token) ^ self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for slot in acc.iter_mut() {
            *slot += unit_interval(splitmix64(&mut state)) * 2.0 - 1.0;
        }
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let lowered = trimmed.to_lowercase();
        let mut tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            // Punctuation-only input: hash the whole trimmed text as one token.
            tokens.push(lowered.as_str());
        }

        let mut acc = vec![0.0f64; self.dimension];
        for token in tokens {
            self.token_vector_into(token, &mut acc);
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            acc[0] = 1.0;
        } else {
            for slot in &mut acc {
                *slot /= norm;
            }
        }
        Ok(acc)
    }
}

fn fnv1a64(text: &str) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Top 53 bits as a float in [0, 1).
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::cosine;

    #[test]
    fn same_text_same_vector() {
        let embedder = HashEmbedder::default();
        assert_eq!(embedder.embed("a").unwrap(), embedder.embed("a").unwrap());
    }

    #[test]
    fn lexical_overlap_orders_similarity() {
        let embedder = HashEmbedder::default();
        let base = embedder.embed("sony music").unwrap();
        let close = embedder.embed("sony music entertainment").unwrap();
        let far = embedder.embed("spanish explorer").unwrap();
        let sim_close = cosine(&base, &close).unwrap();
        let sim_far = cosine(&base, &far).unwrap();
        assert!(
            sim_close > sim_far,
            "expected overlap ordering, got {sim_close} vs {sim_far}"
        );
    }

    #[test]
    fn identical_query_and_passage_text_are_self_similar() {
        let embedder = HashEmbedder::default();
        let passage = embedder.embed("The Portola expedition reached the coast").unwrap();
        let query = embedder.embed("The Portola expedition reached the coast").unwrap();
        let sim = cosine(&passage, &query).unwrap();
        assert!((sim - 1.0).abs() < 1e-6);
    }

    #[test]
    fn output_is_unit_length() {
        let embedder = HashEmbedder::new(64, 7);
        let v = embedder.embed("how long is this vector").unwrap();
        assert_eq!(v.len(), 64);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_text_is_rejected() {
        let embedder = HashEmbedder::default();
        assert!(matches!(
            embedder.embed("   ").unwrap_err(),
            ProviderError::EmptyText
        ));
    }

    #[test]
    fn case_and_tokenization_are_normalized() {
        let embedder = HashEmbedder::default();
        let a = embedder.embed("Sony Music!").unwrap();
        let b = embedder.embed("sony   music").unwrap();
        let sim = cosine(&a, &b).unwrap();
        assert!((sim - 1.0).abs() < 1e-9);
    }
}
