//! Concurrent transposition table from tree hash to fitness.
//!
//! The map is split into independently locked shards picked by the top bits
//! of the hash, so writers to different shards never contend. Lookups take
//! a shared lock only. The evaluator runs with no lock held: two threads that
//! miss on the same hash may both evaluate, but only the first insert is
//! kept and both callers return that stored value.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

/// Shard count; a power of two.
pub const DEFAULT_SHARDS: usize = 64;

/// Keys are already uniformly distributed 64-bit hashes.
#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.0 = n;
    }
}

type Shard<V> = RwLock<HashMap<u64, V, BuildHasherDefault<PassThrough>>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CachedFitness<T> {
    pub error: T,
    /// Node count of the tree that produced the value.
    pub length: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

pub struct FitnessCache<T> {
    shards: Box<[Shard<CachedFitness<T>>]>,
    shift: u32,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<T: Copy> Default for FitnessCache<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Copy> FitnessCache<T> {
    pub fn new() -> Self {
        Self::with_shards(DEFAULT_SHARDS)
    }

    /// `shards` is rounded up to a power of two.
    pub fn with_shards(shards: usize) -> Self {
        let n = shards.max(1).next_power_of_two();
        FitnessCache {
            shards: (0..n).map(|_| Shard::default()).collect(),
            shift: 64 - n.trailing_zeros(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    fn shard(&self, hash: u64) -> &Shard<CachedFitness<T>> {
        let i = if self.shards.len() == 1 {
            0
        } else {
            (hash >> self.shift) as usize
        };
        &self.shards[i]
    }

    pub fn get(&self, hash: u64) -> Option<CachedFitness<T>> {
        self.shard(hash)
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&hash)
            .copied()
    }

    /// Returns the stored fitness for `hash`, computing and storing it with
    /// `evaluate` on a miss. The flag is true on a hit.
    pub fn get_or_evaluate<F>(&self, hash: u64, evaluate: F) -> (CachedFitness<T>, bool)
    where
        F: FnOnce() -> CachedFitness<T>,
    {
        if let Some(v) = self.get(hash) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return (v, true);
        }
        let value = evaluate();
        self.misses.fetch_add(1, Ordering::Relaxed);
        let stored = *self
            .shard(hash)
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(hash)
            .or_insert(value);
        (stored, false)
    }

    /// Inserts already evaluated entries without touching the hit/miss
    /// counters. Existing entries are kept.
    pub fn seed_with<I>(&self, entries: I)
    where
        I: IntoIterator<Item = (u64, CachedFitness<T>)>,
    {
        for (h, v) in entries {
            self.shard(h)
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .entry(h)
                .or_insert(v);
        }
    }

    pub fn len(&self) -> usize {
        self.shards
            .iter()
            .map(|s| s.read().unwrap_or_else(|e| e.into_inner()).len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len() as u64,
        }
    }
}
