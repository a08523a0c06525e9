//! Post-hoc measurements on trained agents.

use crate::envs::Env;
use crate::explorer::{ActionValues, SkillDiscriminator};
use crate::policy::{sample_action, PolicyConfig};
use crate::rng::RunRng;
use crate::Result;

/// Fraction of freshly visited states whose skill the discriminator recovers.
///
/// Each skill is rolled out for `episodes_per_skill` episodes with the skill
/// held fixed; every visited next-state is labelled with its skill. The
/// rollouts are new samples, never seen during training.
pub fn skill_accuracy(
    discriminator: &SkillDiscriminator,
    q: &ActionValues,
    env: &Env,
    policy: PolicyConfig,
    episodes_per_skill: usize,
    rng: &mut RunRng,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for z in 0..discriminator.num_skills {
        for _ in 0..episodes_per_skill {
            let mut state = env.reset_with(rng);
            loop {
                let a = sample_action(&q.values(&state.observation, z)?, policy, rng);
                state = env.transition(&state, a)?;
                correct += usize::from(discriminator.predict(&state.observation)? == z);
                total += 1;
                if state.episode_done {
                    break;
                }
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}
