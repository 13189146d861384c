use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Inference delay in ticks between observation snapshot and chunk delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatencyModel {
    Constant(u64),
    /// Per-cycle draw on `lo..=hi`, reproducible from `seed`.
    UniformRandom { lo: u64, hi: u64, seed: u64 },
}

impl LatencyModel {
    pub fn is_valid(&self) -> bool {
        match *self {
            LatencyModel::Constant(_) => true,
            LatencyModel::UniformRandom { lo, hi, .. } => lo <= hi,
        }
    }

    pub fn max_ticks(&self) -> u64 {
        match *self {
            LatencyModel::Constant(m) => m,
            LatencyModel::UniformRandom { hi, .. } => hi,
        }
    }

    pub fn sampler(&self) -> LatencySampler {
        let seed = match *self {
            LatencyModel::Constant(_) => 0,
            LatencyModel::UniformRandom { seed, .. } => seed,
        };
        LatencySampler {
            model: *self,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Stateful draw sequence for one episode.
#[derive(Debug, Clone)]
pub struct LatencySampler {
    model: LatencyModel,
    rng: ChaCha8Rng,
}

impl LatencySampler {
    pub fn model(&self) -> LatencyModel {
        self.model
    }

    pub fn draw(&mut self) -> u64 {
        match self.model {
            LatencyModel::Constant(m) => m,
            LatencyModel::UniformRandom { lo, hi, .. } => self.rng.random_range(lo..=hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws() {
        let mut s = LatencyModel::Constant(5).sampler();
        assert!((0..10).all(|_| s.draw() == 5));
    }

    #[test]
    fn uniform_draws_are_reproducible_and_bounded() {
        let m = LatencyModel::UniformRandom { lo: 2, hi: 7, seed: 11 };
        let a: Vec<u64> = {
            let mut s = m.sampler();
            (0..200).map(|_| s.draw()).collect()
        };
        let b: Vec<u64> = {
            let mut s = m.sampler();
            (0..200).map(|_| s.draw()).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| (2..=7).contains(&x)));
        assert!(a.contains(&2) && a.contains(&7));
    }

    #[test]
    fn validity() {
        assert!(!LatencyModel::UniformRandom { lo: 3, hi: 1, seed: 0 }.is_valid());
        assert!(LatencyModel::Constant(0).is_valid());
    }
}
