//! Content hashes stamped onto every emitted artifact.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a value's canonical JSON form.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

/// Key/value provenance attached to reports; ordered for stable output.
pub type Provenance = BTreeMap<String, String>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn json_hash_depends_on_content_only() {
        let a: BTreeMap<&str, u32> = [("x", 1), ("y", 2)].into_iter().collect();
        let b: BTreeMap<&str, u32> = [("y", 2), ("x", 1)].into_iter().collect();
        assert_eq!(hash_json(&a).unwrap(), hash_json(&b).unwrap());
        assert_ne!(hash_json(&a).unwrap(), hash_json(&[1, 2]).unwrap());
    }
}
