//! Tagged random streams and the decision-independent samplers built on them.
//!
//! Every random quantity in a simulation is drawn from a stream addressed by
//! `(master_seed, tag path)`, e.g. `[scenario, "cg", unit]`. Two evaluations
//! that share a master seed therefore see identical outage histories for the
//! units they have in common, which is what keeps capacity-credit bisection
//! stable (common random numbers).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum redraws before a truncated normal gives up.
pub const TRUNCATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Name(&'static str),
    Index(u64),
}

impl From<&'static str> for Tag {
    fn from(s: &'static str) -> Self {
        Tag::Name(s)
    }
}

impl From<u64> for Tag {
    fn from(i: u64) -> Self {
        Tag::Index(i)
    }
}

impl From<usize> for Tag {
    fn from(i: usize) -> Self {
        Tag::Index(i as u64)
    }
}

impl From<u32> for Tag {
    fn from(i: u32) -> Self {
        Tag::Index(u64::from(i))
    }
}

/// Builds a tag path from heterogeneous labels: `tags![year, "cg", unit]`.
#[macro_export]
macro_rules! tags {
    ($($t:expr),* $(,)?) => {
        [$($crate::rng::Tag::from($t)),*]
    };
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &Tag) -> u64 {
    match tag {
        Tag::Name(s) => {
            // FNV-1a, then a domain bit so names never collide with indices.
            let mut h: u64 = 0xCBF2_9CE4_8422_2325;
            for b in s.bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01B3);
            }
            splitmix64(h) | 1
        }
        Tag::Index(i) => splitmix64(*i ^ 0x5851_F42D_4C95_7F2D) & !1,
    }
}

pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl std::fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RandomStream").finish_non_exhaustive()
    }
}

/// Deterministic stream for `(master_seed, tags)`.
pub fn derive_stream(master_seed: u64, tags: &[Tag]) -> RandomStream {
    let mut h = splitmix64(master_seed);
    for tag in tags {
        h = splitmix64(h ^ tag_hash(tag)).rotate_left(17) ^ h.wrapping_mul(0x2545_F491_4F6C_DD1D);
    }
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    RandomStream { rng: ChaCha8Rng::from_seed(seed) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Normal,
    /// `mu`/`sigma` are the parameters of the underlying normal.
    Lognormal,
    TruncatedNormal { lower: f64, upper: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("truncated normal N({mu}, {sigma}) found no draw inside ({lower}, {upper}) after {attempts} attempts")]
    Truncation { mu: f64, sigma: f64, lower: f64, upper: f64, attempts: usize },
    #[error("invalid distribution parameters: {0}")]
    Parameters(String),
}

impl RandomStream {
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn bernoulli(&mut self, p_on: f64) -> bool {
        if p_on >= 1.0 {
            true
        } else if p_on <= 0.0 {
            false
        } else {
            self.uniform() < p_on
        }
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        if mean <= 0.0 {
            return 0.0;
        }
        let exp = Exp::new(1.0 / mean).expect("positive rate");
        exp.sample(&mut self.rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    pub fn sample(&mut self, kind: DistributionKind, mu: f64, sigma: f64) -> Result<f64, SampleError> {
        if !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(SampleError::Parameters(format!("mu={mu}, sigma={sigma}")));
        }
        match kind {
            DistributionKind::Normal => {
                if sigma == 0.0 {
                    return Ok(mu);
                }
                Ok(Normal::new(mu, sigma).expect("checked").sample(&mut self.rng))
            }
            DistributionKind::Lognormal => {
                if sigma == 0.0 {
                    return Ok(mu.exp());
                }
                Ok(LogNormal::new(mu, sigma).expect("checked").sample(&mut self.rng))
            }
            DistributionKind::TruncatedNormal { lower, upper } => {
                if !(lower < upper) {
                    return Err(SampleError::Parameters(format!("bounds ({lower}, {upper})")));
                }
                if sigma == 0.0 {
                    return if mu > lower && mu < upper {
                        Ok(mu)
                    } else {
                        Err(SampleError::Truncation { mu, sigma, lower, upper, attempts: 0 })
                    };
                }
                let normal = Normal::new(mu, sigma).expect("checked");
                for _ in 0..TRUNCATION_ATTEMPTS {
                    let x = normal.sample(&mut self.rng);
                    if x > lower && x < upper {
                        return Ok(x);
                    }
                }
                Err(SampleError::Truncation { mu, sigma, lower, upper, attempts: TRUNCATION_ATTEMPTS })
            }
        }
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Free-function form of [`RandomStream::sample`].
pub fn sample_distribution(
    kind: DistributionKind,
    mu: f64,
    sigma: f64,
    stream: &mut RandomStream,
) -> Result<f64, SampleError> {
    stream.sample(kind, mu, sigma)
}

pub fn sample_bernoulli_state(p_on: f64, stream: &mut RandomStream) -> bool {
    stream.bernoulli(p_on)
}

/// Underlying-normal parameters of a lognormal with the given mean and
/// coefficient of variation.
pub fn lognormal_params(mean: f64, cov: f64) -> (f64, f64) {
    let s2 = (1.0 + cov * cov).ln();
    (mean.ln() - 0.5 * s2, s2.sqrt())
}

/// Alternating up/down path of a repairable component. Durations are
/// exponential with means `mttf` and `mttr`, rounded up to whole hours; the
/// path starts up.
pub fn sample_two_state_path(mttf: f64, mttr: f64, horizon: usize, stream: &mut RandomStream) -> Vec<bool> {
    let mut path = vec![true; horizon];
    if mttr <= 0.0 {
        return path;
    }
    let mut t = 0usize;
    let mut up = true;
    while t < horizon {
        let mean = if up { mttf } else { mttr };
        let dur = stream.exponential(mean).ceil().max(1.0);
        let len = if dur >= (horizon - t) as f64 { horizon - t } else { dur as usize };
        if !up {
            path[t..t + len].fill(false);
        }
        t += len;
        up = !up;
    }
    path
}
