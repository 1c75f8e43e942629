//! Replica execution and random substreams.
//!
//! Every replica draws from its own ChaCha8 stream. The key is built from
//! the master seed and a domain tag (one per experiment role), and the
//! stream id is the replica ordinal. Results are collected in ordinal order,
//! so reductions over them do not depend on the worker count or on whether
//! the `parallel` feature is enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Deterministic substream `index` of `(master, domain)`.
pub fn substream(master: u64, domain: u64, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Domain tags separating the substreams used by different roles.
pub mod domain {
    pub const PATHS: u64 = 1;
    pub const LIFETIME: u64 = 2;
    pub const KERNEL: u64 = 3;
    pub const FK_LHS: u64 = 4;
    pub const FK_RHS: u64 = 5;
    pub const INNER: u64 = 6;
    pub const ORACLE: u64 = 7;
    pub const TRACE: u64 = 8;
}

/// Map `f` over replica ordinals `0..n`, in parallel when the `parallel`
/// feature is on. Output order is always the ordinal order.
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicas_sequential(n, f)
    }
}

/// Sequential reference implementation of [`map_replicas`].
pub fn map_replicas_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
