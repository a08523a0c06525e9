//! Homeostatic mode switching.
//!
//! [`HomeoState`] turns a scalar signal into Bernoulli triggers whose long-run
//! rate tracks the target `rho`, firing more often when the signal is high
//! relative to its recent history. [`SwitchState`] wraps it into the
//! exploit/explore schedule: an initial explore-only window, then informed
//! triggers on the exploiter's value promise discrepancy, each opening an
//! explore window of fixed length.

use alloc::vec::Vec;

use rand::Rng;

/// Guard under the square root of the running variance.
pub const HOMEO_EPSILON: f64 = 1e-8;

/// Target rates swept by the harness.
pub const RHO_SWEEP: [f64; 4] = [0.1, 0.01, 0.001, 0.0001];

#[derive(Debug, Clone, PartialEq)]
pub struct HomeoState {
    pub rho: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub transformed_mean: f64,
    pub t: u64,
}

impl HomeoState {
    pub fn new(rho: f64) -> Self {
        assert!(rho > 0.0 && rho <= 1.0, "target rate must lie in (0, 1]");
        HomeoState {
            rho,
            mean: 0.0,
            second_moment: 1.0,
            transformed_mean: 1.0,
            t: 0,
        }
    }

    /// Updates the statistics with `x` and returns the trigger probability
    /// `min(1, ρ·x⁺/x̄⁺)`.
    pub fn update(&mut self, x: f64) -> f64 {
        self.t += 1;
        let tau = (self.t as f64).min(100.0 / self.rho);
        let a = 1.0 / tau;
        self.mean = (1.0 - a) * self.mean + a * x;
        let dev = x - self.mean;
        self.second_moment = (1.0 - a) * self.second_moment + a * dev * dev;
        let x_plus = libm::exp(dev / libm::sqrt(self.second_moment + HOMEO_EPSILON));
        self.transformed_mean = (1.0 - a) * self.transformed_mean + a * x_plus;
        (self.rho * x_plus / self.transformed_mean).min(1.0)
    }

    /// One controller step: update, then sample the trigger.
    pub fn homeo_step<R: Rng + ?Sized>(&mut self, x: f64, rng: &mut R) -> bool {
        let p = self.update(x);
        rng.random::<f64>() < p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exploit,
    Explor,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exploit => "exploit",
            Mode::Explor => "explor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exploit" => Some(Mode::Exploit),
            "explor" => Some(Mode::Explor),
            _ => None,
        }
    }
}

/// Mode for one step, and whether an explore window opened on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeDecision {
    pub mode: Mode,
    pub window_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchState {
    pub mode: Mode,
    pub explore_steps_remaining: usize,
    pub explore_duration: usize,
    pub starting_mode_steps: usize,
    /// Skip the controller entirely and always explore.
    pub always_explore: bool,
}

impl SwitchState {
    pub fn new(explore_duration: usize, starting_mode_steps: usize) -> Self {
        assert!(explore_duration >= 1, "explore duration must be positive");
        SwitchState {
            mode: Mode::Exploit,
            explore_steps_remaining: 0,
            explore_duration,
            starting_mode_steps,
            always_explore: false,
        }
    }

    pub fn always_explore() -> Self {
        SwitchState {
            always_explore: true,
            ..SwitchState::new(1, 0)
        }
    }

    /// Chooses the mode for `step`. Outside the starting window and any open
    /// explore window, `promise` feeds the homeostasis controller; a missing
    /// signal (window not yet full) means exploit.
    pub fn select_mode<R: Rng + ?Sized>(
        &mut self,
        homeo: &mut HomeoState,
        promise: Option<f64>,
        step: usize,
        rng: &mut R,
    ) -> ModeDecision {
        // the starting window (or an always-explore run) counts as one window
        let decision = if self.always_explore || step < self.starting_mode_steps {
            ModeDecision {
                mode: Mode::Explor,
                window_start: step == 0,
            }
        } else if self.explore_steps_remaining > 0 {
            self.explore_steps_remaining -= 1;
            ModeDecision {
                mode: Mode::Explor,
                window_start: false,
            }
        } else {
            match promise {
                Some(x) if homeo.homeo_step(x, rng) => {
                    self.explore_steps_remaining = self.explore_duration - 1;
                    ModeDecision {
                        mode: Mode::Explor,
                        window_start: true,
                    }
                }
                _ => ModeDecision {
                    mode: Mode::Exploit,
                    window_start: false,
                },
            }
        };
        self.mode = decision.mode;
        decision
    }
}

/// Fraction of steps on which a new explore window began.
pub fn switch_rate(history: &[ModeDecision]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    history.iter().filter(|d| d.window_start).count() as f64 / history.len() as f64
}

/// Lengths of maximal runs of explore steps, split at window starts.
pub fn explore_window_lengths(history: &[ModeDecision]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut current = 0;
    for d in history {
        if d.mode == Mode::Explor && !d.window_start && current > 0 {
            current += 1;
            continue;
        }
        if current > 0 {
            out.push(current);
            current = 0;
        }
        if d.mode == Mode::Explor {
            current = 1;
        }
    }
    if current > 0 {
        out.push(current);
    }
    out
}
