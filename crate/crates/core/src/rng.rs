//! Seeded random number generation and seed derivation.
//!
//! All randomized operations in this crate draw from ChaCha8, a
//! counter-based stream cipher generator with a stable, documented
//! output sequence. Unlike `StdRng`, its byte stream is guaranteed not
//! to change across library versions or platforms, which is what makes
//! whole-pipeline runs reproducible bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::InteractionLog;

/// Returns the generator used everywhere in the harness, seeded with
/// `seed`. Equal seeds produce equal streams on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a master seed and a purpose
/// label, via SHA-256 over a fixed domain prefix. Distinct labels give
/// statistically independent streams; the derivation is stable across
/// versions because it depends only on the hash input layout.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"spbench.seed.v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Content fingerprint of an interaction log: SHA-256 over the packed
/// (user, item, timestamp) triples in log order, as lowercase hex.
///
/// Used in report manifests and to derive per-fit seeds, so that
/// identical training sets always train under identical seeds while
/// different training sets get independent ones.
pub fn fingerprint_log(log: &InteractionLog) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"spbench.log.v1");
    hasher.update((log.len() as u64).to_le_bytes());
    for it in log.iter() {
        hasher.update(it.user.to_le_bytes());
        hasher.update(it.item.to_le_bytes());
        hasher.update(it.timestamp.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Seed for one model fit: a function of the master seed, the
/// algorithm, and the training set content. Two fits see the same seed
/// exactly when they train the same algorithm on the same data.
pub fn fit_seed(master_seed: u64, algorithm_id: &str, train: &InteractionLog) -> u64 {
    derive_seed(
        master_seed,
        &format!("fit/{algorithm_id}/{}", fingerprint_log(train)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;

    #[test]
    fn same_seed_same_stream() {
        use rand::Rng;
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        let xs: Vec<u64> = (0..16).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        let a = derive_seed(7, "sample");
        let b = derive_seed(7, "shift");
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, "sample"));
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let log1 = InteractionLog::from_unsorted(vec![Interaction::new(0, 0, 10)]);
        let log2 = InteractionLog::from_unsorted(vec![Interaction::new(0, 1, 10)]);
        assert_ne!(fingerprint_log(&log1), fingerprint_log(&log2));
        assert_eq!(fingerprint_log(&log1), fingerprint_log(&log1));
    }

    #[test]
    fn fit_seed_tracks_training_set_identity() {
        let log1 = InteractionLog::from_unsorted(vec![Interaction::new(0, 0, 10)]);
        let log2 = InteractionLog::from_unsorted(vec![Interaction::new(0, 0, 10)]);
        let log3 = InteractionLog::from_unsorted(vec![Interaction::new(0, 1, 10)]);
        assert_eq!(fit_seed(1, "bprmf", &log1), fit_seed(1, "bprmf", &log2));
        assert_ne!(fit_seed(1, "bprmf", &log1), fit_seed(1, "bprmf", &log3));
        assert_ne!(fit_seed(1, "bprmf", &log1), fit_seed(1, "uknn", &log1));
    }
}
