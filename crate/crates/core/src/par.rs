//! Deterministic trial fan-out.
//!
//! Every Monte Carlo run is split into fixed-size chunks of
//! [`TRIALS_PER_STREAM`] trials. Chunk `c` draws from its own ChaCha12 stream
//! `c`, keyed by `(seed, tag)`. Chunking depends only on the trial count, so
//! the per-trial values (and any ordered reduction over them) are the same for
//! every worker count, and for the sequential fallback.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Generator handed to each trial.
pub type TrialRng = ChaCha12Rng;

/// Trials drawn from one ChaCha stream before moving to the next.
pub const TRIALS_PER_STREAM: usize = 4096;

/// Human-readable identity of the substream scheme, echoed in CSV metadata.
pub const RNG_ALGORITHM: &str = "chacha12;key=seed|tag;stream=chunk;chunk=4096";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the current rayon pool. Identical to `Sequential` without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

/// Root of a family of independent streams.
///
/// The `tag` separates unrelated simulations driven by the same user seed
/// (different sweep points, different experiment stages).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    seed: u64,
    tag: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey { seed, tag: 0 }
    }

    pub fn with_tag(self, tag: u64) -> Self {
        StreamKey { tag, ..self }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn substream(&self, index: u64) -> TrialRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.tag.to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

/// Runs `trial` once per trial index and returns the results in trial order.
pub fn map_trials<T, F>(trials: usize, key: StreamKey, exec: Execution, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut TrialRng) -> T + Sync,
{
    let chunks = trials.div_ceil(TRIALS_PER_STREAM);
    let run_chunk = |c: usize| -> Vec<T> {
        let start = c * TRIALS_PER_STREAM;
        let end = (start + TRIALS_PER_STREAM).min(trials);
        let mut rng = key.substream(c as u64);
        (start..end).map(|_| trial(&mut rng)).collect()
    };

    let per_chunk: Vec<Vec<T>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..chunks).into_par_iter().map(run_chunk).collect(),
        _ => (0..chunks).map(run_chunk).collect(),
    };

    let mut out = Vec::with_capacity(trials);
    for chunk in per_chunk {
        out.extend(chunk);
    }
    out
}

/// Fallible variant of [`map_trials`]; the first error in trial order wins.
pub fn try_map_trials<T, E, F>(
    trials: usize,
    key: StreamKey,
    exec: Execution,
    trial: F,
) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut TrialRng) -> Result<T, E> + Sync,
{
    map_trials(trials, key, exec, trial).into_iter().collect()
}

/// Maps independent work items (sweep points) in order.
pub fn map_items<I, T, F>(items: Vec<I>, exec: Execution, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.into_par_iter().map(f).collect(),
        _ => items.into_iter().map(f).collect(),
    }
}
