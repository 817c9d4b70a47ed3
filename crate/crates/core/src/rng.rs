//! Seeded random streams and multivariate normal sampling.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::LocationScatter;
use crate::matrix::DataMatrix;

/// Reproducible random stream.
///
/// Backed by ChaCha8. `Rng::new(seed)` is stream 0 of `seed`; substreams
/// `(seed, id)` use the generator's native stream selector and never overlap.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `count` distinct indices drawn from `0..n`, in draw order.
    pub fn choose_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, count.min(n)).into_vec()
    }
}

/// Mixes two words into a derived seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` rows `μ + L·z` with z i.i.d. standard normal.
pub fn mvn_sample(rng: &mut Rng, loc_scat: &LocationScatter, n: usize) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::DomainError("sample size must be at least 1".into()));
    }
    let p = loc_scat.dim();
    let l = loc_scat.chol();
    let mu = loc_scat.mu();
    let mut values = Vec::with_capacity(n * p);
    let mut z = DVector::<f64>::zeros(p);
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.normal();
        }
        for i in 0..p {
            let mut v = mu[i];
            for k in 0..=i {
                v += l[(i, k)] * z[k];
            }
            values.push(v);
        }
    }
    DataMatrix::from_row_major(n, p, values)
}
