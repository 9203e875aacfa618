//! Counter-based, chunked Monte Carlo draws of perturbation vectors.
//!
//! Samples are split into chunks of [`CHUNK_SAMPLES`]. Chunk `c` of player
//! `i` is drawn from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `(i << 40) | c`, filling the chunk sample-major (all `K` coordinates of
//! one sample before the next). A chunk's content depends only on
//! `(seed, player, chunk, K, marginal)`, never on which thread produced it,
//! so serial and parallel runs see identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_indexed, Execution};
use crate::structural::Marginal;

pub const CHUNK_SAMPLES: usize = 1 << 14;

pub(crate) fn chunk_rng(seed: u64, player: usize, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((player as u64) << 40) | chunk as u64);
    rng
}

fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK_SAMPLES)
}

fn chunk_len(n: usize, chunk: usize) -> usize {
    (n - chunk * CHUNK_SAMPLES).min(CHUNK_SAMPLES)
}

fn draw_chunk(
    marginal: &Marginal,
    k: usize,
    n: usize,
    seed: u64,
    player: usize,
    chunk: usize,
) -> Vec<f64> {
    let mut rng = chunk_rng(seed, player, chunk);
    let len = chunk_len(n, chunk) * k;
    (0..len).map(|_| marginal.sample(&mut rng)).collect()
}

/// Index of the largest `x_a + eps_a`; the lowest index wins ties.
#[inline]
fn argmax(x: &[f64], eps: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut best_val = x[0] + eps[0];
    let mut tie = false;
    for a in 1..x.len() {
        let v = x[a] + eps[a];
        if v > best_val {
            best = a;
            best_val = v;
            tie = false;
        } else if v == best_val {
            tie = true;
        }
    }
    (best, tie)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgmaxCounts {
    pub counts: Vec<u64>,
    pub ties: u64,
    pub samples: u64,
}

impl ArgmaxCounts {
    fn empty(k: usize) -> Self {
        ArgmaxCounts {
            counts: vec![0; k],
            ties: 0,
            samples: 0,
        }
    }

    fn absorb(&mut self, other: ArgmaxCounts) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.ties += other.ties;
        self.samples += other.samples;
    }

    fn tally(x: &[f64], values: &[f64]) -> Self {
        let k = x.len();
        let mut out = ArgmaxCounts::empty(k);
        for eps in values.chunks_exact(k) {
            let (a, tie) = argmax(x, eps);
            out.counts[a] += 1;
            out.ties += tie as u64;
            out.samples += 1;
        }
        out
    }
}

/// Counts argmax outcomes of `x + ε` over `n` fresh draws.
pub fn argmax_counts(
    x: &[f64],
    marginal: &Marginal,
    player: usize,
    n: usize,
    seed: u64,
    exec: Execution,
) -> ArgmaxCounts {
    let k = x.len();
    let parts = map_indexed(exec, chunk_count(n), |c| {
        ArgmaxCounts::tally(x, &draw_chunk(marginal, k, n, seed, player, c))
    });
    let mut total = ArgmaxCounts::empty(k);
    for p in parts {
        total.absorb(p);
    }
    total
}

/// A stored draw, reused across fixed-point iterations so the estimated
/// response map is a deterministic function of the utilities.
#[derive(Debug, Clone)]
pub struct FrozenSample {
    k: usize,
    n: usize,
    chunks: Vec<Vec<f64>>,
}

impl FrozenSample {
    pub fn draw(
        marginal: &Marginal,
        player: usize,
        k: usize,
        n: usize,
        seed: u64,
        exec: Execution,
    ) -> Self {
        let chunks = map_indexed(exec, chunk_count(n), |c| {
            draw_chunk(marginal, k, n, seed, player, c)
        });
        FrozenSample { k, n, chunks }
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn counts(&self, x: &[f64], exec: Execution) -> ArgmaxCounts {
        assert_eq!(
            x.len(),
            self.k,
            "utility vector length must match the sample"
        );
        let parts = map_indexed(exec, self.chunks.len(), |c| {
            ArgmaxCounts::tally(x, &self.chunks[c])
        });
        let mut total = ArgmaxCounts::empty(self.k);
        for p in parts {
            total.absorb(p);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structural::MarginalKind;

    #[test]
    fn serial_and_parallel_counts_match() {
        let m = Marginal::new(MarginalKind::Normal, 1.3).unwrap();
        let x = [0.0, 0.4, -0.2, 1.0];
        let n = 3 * CHUNK_SAMPLES + 123;
        let s = argmax_counts(&x, &m, 2, n, 17, Execution::Serial);
        let p = argmax_counts(&x, &m, 2, n, 17, Execution::Parallel);
        assert_eq!(s, p);
        assert_eq!(s.samples, n as u64);
        assert_eq!(s.counts.iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn frozen_sample_reproduces_fresh_counts() {
        let m = Marginal::new(MarginalKind::Gumbel, 0.7).unwrap();
        let x = [0.3, 0.0, 0.5];
        let n = 2 * CHUNK_SAMPLES + 5;
        let fresh = argmax_counts(&x, &m, 1, n, 99, Execution::Parallel);
        let frozen = FrozenSample::draw(&m, 1, 3, n, 99, Execution::Serial);
        assert_eq!(frozen.counts(&x, Execution::Parallel), fresh);
    }

    #[test]
    fn players_use_distinct_streams() {
        let m = Marginal::new(MarginalKind::Uniform, 1.0).unwrap();
        let a = draw_chunk(&m, 2, 10, 5, 0, 0);
        let b = draw_chunk(&m, 2, 10, 5, 1, 0);
        assert_ne!(a, b);
    }

    #[test]
    fn lowest_index_wins_ties() {
        assert_eq!(argmax(&[1.0, 1.0, 0.0], &[0.0, 0.0, 0.5]), (0, true));
        assert_eq!(argmax(&[1.0, 2.0], &[0.0, 0.0]), (1, false));
    }
}
