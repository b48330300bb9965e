//! Hashed lexical features for the toy encoder.
//!
//! Tokens are whitespace-delimited, lowercased, with control characters
//! removed. Each token contributes a word-unigram feature and the character
//! trigrams of `^token$`. Features are hashed with 64-bit FNV-1a: the low bits
//! pick a bucket (modulo `hash_dim`), the top bit picks the sign. The merged
//! vector is L2-normalized. Marker strings such as `<s>` are ordinary tokens.

pub const FEATURIZER_VERSION: &str = "fnv1a64-signed/word1+char3/l2/v1";

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// `self - other`, dropping exact zeros.
    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() || j < b.len() {
            let entry = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    i += 1;
                    (ia, va)
                }
                (Some(&(ia, _)), Some(&(ib, vb))) if ib < ia => {
                    j += 1;
                    (ib, -vb)
                }
                (Some(&(ia, va)), Some(&(_, vb))) => {
                    i += 1;
                    j += 1;
                    (ia, va - vb)
                }
                (Some(&(ia, va)), None) => {
                    i += 1;
                    (ia, va)
                }
                (None, Some(&(ib, vb))) => {
                    j += 1;
                    (ib, -vb)
                }
                (None, None) => unreachable!(),
            };
            if entry.1 != 0.0 {
                out.push(entry);
            }
        }
        SparseVec { entries: out }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn bucket(feature: &str, hash_dim: usize) -> (u32, f64) {
    let h = fnv1a64(feature.as_bytes());
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    ((h % hash_dim as u64) as u32, sign)
}

/// Feature strings of `text`, in emission order.
pub fn feature_strings(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let token: String = raw.chars().filter(|c| !c.is_control()).flat_map(char::to_lowercase).collect();
        if token.is_empty() {
            continue;
        }
        out.push(format!("w:{token}"));
        let padded: Vec<char> = std::iter::once('^').chain(token.chars()).chain(std::iter::once('$')).collect();
        for window in padded.windows(3) {
            out.push(format!("c:{}", window.iter().collect::<String>()));
        }
    }
    out
}

/// Hashes and L2-normalizes the features of `text`.
pub fn featurize(text: &str, hash_dim: usize) -> SparseVec {
    let mut raw: Vec<(u32, f64)> = feature_strings(text).iter().map(|f| bucket(f, hash_dim)).collect();
    raw.sort_by_key(|e| e.0);
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
    for (idx, v) in raw {
        match entries.last_mut() {
            Some(last) if last.0 == idx => last.1 += v,
            _ => entries.push((idx, v)),
        }
    }
    entries.retain(|e| e.1 != 0.0);
    let mut vec = SparseVec { entries };
    let norm = vec.norm();
    if norm > 0.0 {
        vec.entries.iter_mut().for_each(|e| e.1 /= norm);
    }
    vec
}
