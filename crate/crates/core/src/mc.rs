//! Seeded, scheduling-independent Monte Carlo batches.
//!
//! Every batch draws from its own ChaCha stream keyed by `(seed, tag, batch)`
//! and batches are merged in index order, so results depend on the seed and
//! the sample count only, never on the number of worker threads.

use crate::stats::{MatAcc, RatioAcc, ScalarAcc};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BATCHES: usize = 64;

pub type McRng = ChaCha8Rng;

/// FNV-1a, used only to turn a tag into a stream id.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn stream_id(tag: &str, index: u64) -> u64 {
    fnv1a(tag) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn rng(seed: u64, tag: &str, index: u64) -> McRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream_id(tag, index));
    r
}

pub trait Merge {
    fn merge_from(&mut self, other: &Self);
}

impl Merge for ScalarAcc {
    fn merge_from(&mut self, o: &Self) {
        self.merge(o)
    }
}

impl Merge for MatAcc {
    fn merge_from(&mut self, o: &Self) {
        self.merge(o)
    }
}

impl Merge for RatioAcc {
    fn merge_from(&mut self, o: &Self) {
        self.merge(o)
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge_from(&mut self, o: &Self) {
        for (a, b) in self.iter_mut().zip(o) {
            a.merge_from(b);
        }
    }
}

/// Concatenates per-batch outputs in batch order.
#[derive(Debug, Clone, PartialEq)]
pub struct Collect<T>(pub Vec<T>);

impl<T> Default for Collect<T> {
    fn default() -> Self {
        Collect(Vec::new())
    }
}

impl<T: Clone> Merge for Collect<T> {
    fn merge_from(&mut self, o: &Self) {
        self.0.extend_from_slice(&o.0);
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge_from(&mut self, o: &Self) {
        self.0.merge_from(&o.0);
        self.1.merge_from(&o.1);
    }
}

impl<A: Merge, B: Merge, C: Merge> Merge for (A, B, C) {
    fn merge_from(&mut self, o: &Self) {
        self.0.merge_from(&o.0);
        self.1.merge_from(&o.1);
        self.2.merge_from(&o.2);
    }
}

/// Runs `body(rng, count, acc)` over [`BATCHES`] batches that together draw
/// `total` samples, then merges the accumulators in batch order.
pub fn run_batches<A, I, F>(seed: u64, tag: &str, total: usize, init: I, body: F) -> Result<A>
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut McRng, usize, &mut A) -> Result<()> + Sync,
{
    let per = total / BATCHES;
    let extra = total % BATCHES;
    let parts: Vec<Result<A>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = per + usize::from(b < extra);
            let mut acc = init();
            if count > 0 {
                let mut r = rng(seed, tag, b as u64);
                body(&mut r, count, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut out = init();
    for p in parts {
        out.merge_from(&p?);
    }
    Ok(out)
}
