//! Seeded random streams.
//!
//! Each consumer inside a run (environment resets, action sampling, replay
//! sampling, the switch controller, parameter init) draws from its own ChaCha
//! stream derived from the run seed, so adding draws in one place never
//! shifts another consumer's sequence.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as RunRng;

/// Named streams used by the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Env = 2,
    Act = 3,
    Replay = 4,
    Controller = 5,
    Task = 6,
    Eval = 7,
}

pub fn stream(seed: u64, which: Stream) -> RunRng {
    let mut rng = RunRng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
