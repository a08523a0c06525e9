//! The exploitation agent: successor features ψ with `Q = ψᵀw`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::Observation;
use crate::linalg::dot;
use crate::policy::{argmax, sample_action, PolicyConfig};
use crate::{Error, Result};

/// Storage for ψ.
#[derive(Debug, Clone, PartialEq)]
pub enum SuccessorRepr {
    /// `psi[(s * num_actions + a) * feature_dim + k]`.
    Tabular { num_states: usize, psi: Vec<f64> },
    /// Affine in the observation: `ψ(s,a)_k = Σ_j W[a][k][j]·x_j + W[a][k][input]`,
    /// stored as `weights[((a * feature_dim + k) * (input_dim + 1)) + j]`.
    Linear { input_dim: usize, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorTable {
    pub repr: SuccessorRepr,
    pub num_actions: usize,
    pub feature_dim: usize,
    pub gamma: f64,
    pub learning_rate: f64,
}

impl SuccessorTable {
    pub fn tabular(num_states: usize, num_actions: usize, feature_dim: usize, gamma: f64, learning_rate: f64) -> Self {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
        SuccessorTable {
            repr: SuccessorRepr::Tabular {
                num_states,
                psi: vec![0.0; num_states * num_actions * feature_dim],
            },
            num_actions,
            feature_dim,
            gamma,
            learning_rate,
        }
    }

    pub fn linear(input_dim: usize, num_actions: usize, feature_dim: usize, gamma: f64, learning_rate: f64) -> Self {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
        SuccessorTable {
            repr: SuccessorRepr::Linear {
                input_dim,
                weights: vec![0.0; num_actions * feature_dim * (input_dim + 1)],
            },
            num_actions,
            feature_dim,
            gamma,
            learning_rate,
        }
    }

    /// ψ(s, a).
    pub fn psi(&self, obs: &Observation, action: usize) -> Result<Vec<f64>> {
        let d = self.feature_dim;
        match (&self.repr, obs) {
            (SuccessorRepr::Tabular { num_states, psi }, Observation::Cell { index, count }) => {
                if count != num_states {
                    return Err(Error::DimensionMismatch {
                        expected: *num_states,
                        actual: *count,
                    });
                }
                let start = (index * self.num_actions + action) * d;
                Ok(psi[start..start + d].to_vec())
            }
            (SuccessorRepr::Linear { input_dim, weights }, Observation::Vector(x)) => {
                if x.len() != *input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: *input_dim,
                        actual: x.len(),
                    });
                }
                let stride = input_dim + 1;
                Ok((0..d)
                    .map(|k| {
                        let row = &weights[(action * d + k) * stride..(action * d + k + 1) * stride];
                        dot(&row[..*input_dim], x) + row[*input_dim]
                    })
                    .collect())
            }
            _ => Err(Error::ObservationKind),
        }
    }

    pub fn q_value(&self, obs: &Observation, action: usize, w: &[f64]) -> Result<f64> {
        Ok(dot(&self.psi(obs, action)?, w))
    }

    /// `ψ(s, a)ᵀw` for every action.
    pub fn q_values(&self, obs: &Observation, w: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_actions).map(|a| self.q_value(obs, a, w)).collect()
    }

    /// `max_a ψ(s, a)ᵀw`.
    pub fn value(&self, obs: &Observation, w: &[f64]) -> Result<f64> {
        let q = self.q_values(obs, w)?;
        Ok(q.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn greedy_action(&self, obs: &Observation, w: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(obs, w)?))
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, w: &[f64], policy: PolicyConfig, rng: &mut R) -> Result<usize> {
        Ok(sample_action(&self.q_values(obs, w)?, policy, rng))
    }

    /// TD step toward `φ_next + γ ψ(s', a*)` with `a* = argmax_a ψ(s',a)ᵀw`;
    /// terminal transitions drop the bootstrap.
    pub fn td_update(
        &mut self,
        obs: &Observation,
        action: usize,
        next_obs: &Observation,
        terminal: bool,
        phi_next: &[f64],
        w: &[f64],
    ) -> Result<()> {
        self.td_update_with_cumulant(obs, action, next_obs, terminal, phi_next, w)
    }

    /// TD step with an arbitrary cumulant vector in place of `φ_next`.
    pub fn td_update_with_cumulant(
        &mut self,
        obs: &Observation,
        action: usize,
        next_obs: &Observation,
        terminal: bool,
        cumulant: &[f64],
        w: &[f64],
    ) -> Result<()> {
        self.td_step(obs, action, next_obs, terminal, cumulant, Bootstrap::Greedy(w))
    }

    /// Policy-evaluation TD step: bootstraps on `Σ_a' π(a'|s') ψ(s', a')` for
    /// the given next-state action distribution.
    pub fn td_update_expected(
        &mut self,
        obs: &Observation,
        action: usize,
        next_obs: &Observation,
        terminal: bool,
        phi_next: &[f64],
        next_probs: &[f64],
    ) -> Result<()> {
        self.td_step(obs, action, next_obs, terminal, phi_next, Bootstrap::Expected(next_probs))
    }

    fn td_step(
        &mut self,
        obs: &Observation,
        action: usize,
        next_obs: &Observation,
        terminal: bool,
        cumulant: &[f64],
        bootstrap: Bootstrap<'_>,
    ) -> Result<()> {
        if cumulant.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: cumulant.len(),
            });
        }
        let current = self.psi(obs, action)?;
        let mut target = cumulant.to_vec();
        if !terminal {
            match bootstrap {
                Bootstrap::Greedy(w) => {
                    let best = self.greedy_action(next_obs, w)?;
                    let next_psi = self.psi(next_obs, best)?;
                    for (t, p) in target.iter_mut().zip(&next_psi) {
                        *t += self.gamma * p;
                    }
                }
                Bootstrap::Expected(probs) => {
                    for (a, &p) in probs.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let next_psi = self.psi(next_obs, a)?;
                        for (t, q) in target.iter_mut().zip(&next_psi) {
                            *t += self.gamma * p * q;
                        }
                    }
                }
            }
        }
        let delta: Vec<f64> = target.iter().zip(&current).map(|(t, c)| t - c).collect();
        self.apply_delta(obs, action, &delta);
        Ok(())
    }

    fn apply_delta(&mut self, obs: &Observation, action: usize, delta: &[f64]) {
        let d = self.feature_dim;
        let lr = self.learning_rate;
        match (&mut self.repr, obs) {
            (SuccessorRepr::Tabular { psi, .. }, Observation::Cell { index, .. }) => {
                let start = (index * self.num_actions + action) * d;
                for (p, dk) in psi[start..start + d].iter_mut().zip(delta) {
                    *p += lr * dk;
                }
            }
            (SuccessorRepr::Linear { input_dim, weights }, Observation::Vector(x)) => {
                let stride = *input_dim + 1;
                for (k, dk) in delta.iter().enumerate() {
                    let row = &mut weights[(action * d + k) * stride..(action * d + k + 1) * stride];
                    for (wj, xj) in row.iter_mut().zip(x.iter().chain(core::iter::once(&1.0))) {
                        *wj += lr * dk * xj;
                    }
                }
            }
            _ => unreachable!("kind checked by psi()"),
        }
    }

    /// Overwrites ψ(s, a) on a tabular table.
    pub fn set_psi(&mut self, obs: &Observation, action: usize, value: &[f64]) -> Result<()> {
        let d = self.feature_dim;
        match (&mut self.repr, obs) {
            (SuccessorRepr::Tabular { psi, .. }, Observation::Cell { index, .. }) => {
                let start = (index * self.num_actions + action) * d;
                psi[start..start + d].copy_from_slice(value);
                Ok(())
            }
            _ => Err(Error::Unsupported("set_psi on a linear table")),
        }
    }

    pub fn parameters(&self) -> &[f64] {
        match &self.repr {
            SuccessorRepr::Tabular { psi, .. } => psi,
            SuccessorRepr::Linear { weights, .. } => weights,
        }
    }
}

enum Bootstrap<'a> {
    Greedy(&'a [f64]),
    Expected(&'a [f64]),
}

/// Sliding window for the value promise discrepancy over `k` steps.
///
/// Holds `V(s_{t-k}) … V(s_t)` and the `k` rewards received between them, in
/// chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct PromiseWindow {
    k: usize,
    values: VecDeque<f64>,
    rewards: VecDeque<f64>,
}

impl PromiseWindow {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "promise horizon must be positive");
        PromiseWindow {
            k,
            values: VecDeque::with_capacity(k + 1),
            rewards: VecDeque::with_capacity(k),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn push_value(&mut self, v: f64) {
        if self.values.len() == self.k + 1 {
            self.values.pop_front();
        }
        self.values.push_back(v);
    }

    pub fn push_reward(&mut self, r: f64) {
        if self.rewards.len() == self.k {
            self.rewards.pop_front();
        }
        self.rewards.push_back(r);
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.rewards.clear();
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.k + 1 && self.rewards.len() == self.k
    }

    pub fn len(&self) -> (usize, usize) {
        (self.values.len(), self.rewards.len())
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() && self.rewards.is_empty()
    }

    /// `|V(s_{t-k}) − Σ_i γ^i R_{t-k+i} − γ^k V(s_t)|`, or `None` until full.
    pub fn value_promise(&self, gamma: f64) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        let mut discounted = 0.0;
        let mut g = 1.0;
        for r in &self.rewards {
            discounted += g * r;
            g *= gamma;
        }
        let first = self.values[0];
        let last = self.values[self.k];
        Some((first - discounted - g * last).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(i: usize, n: usize) -> Observation {
        Observation::Cell { index: i, count: n }
    }

    #[test]
    fn q_value_of_aligned_psi() {
        let mut t = SuccessorTable::tabular(2, 2, 2, 0.9, 0.1);
        let w = [0.6, 0.8];
        t.set_psi(&cell(0, 2), 1, &w).unwrap();
        assert!((t.q_value(&cell(0, 2), 1, &w).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(t.q_value(&cell(1, 2), 0, &w).unwrap(), 0.0);
    }

    #[test]
    fn terminal_update_with_unit_rate_copies_phi() {
        let mut t = SuccessorTable::tabular(3, 2, 3, 0.9, 1.0);
        t.set_psi(&cell(1, 3), 0, &[5.0, 5.0, 5.0]).unwrap();
        let phi = [0.0, 1.0, 0.0];
        t.td_update(&cell(0, 3), 1, &cell(1, 3), true, &phi, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.psi(&cell(0, 3), 1).unwrap(), phi.to_vec());
    }

    #[test]
    fn fixed_point_is_left_unchanged() {
        let mut t = SuccessorTable::tabular(2, 1, 2, 0.5, 0.5);
        let phi = [0.3, 0.4];
        t.set_psi(&cell(0, 2), 0, &phi).unwrap();
        t.td_update(&cell(0, 2), 0, &cell(1, 2), false, &phi, &[1.0, 0.0]).unwrap();
        assert_eq!(t.psi(&cell(0, 2), 0).unwrap(), phi.to_vec());
    }

    #[test]
    fn linear_table_learns_constant_target() {
        let mut t = SuccessorTable::linear(2, 1, 1, 0.5, 0.5);
        let x = Observation::Vector(vec![0.5, -0.5]);
        for _ in 0..200 {
            t.td_update(&x, 0, &x, true, &[1.0], &[1.0]).unwrap();
        }
        assert!((t.psi(&x, 0).unwrap()[0] - 1.0).abs() < 1e-9);
        assert!(matches!(t.psi(&cell(0, 2), 0), Err(Error::ObservationKind)));
    }

    #[test]
    fn promise_examples() {
        let mut w = PromiseWindow::new(1);
        assert_eq!(w.value_promise(0.9), None);
        w.push_value(1.0);
        w.push_reward(0.5);
        w.push_value(0.4);
        assert!((w.value_promise(0.9).unwrap() - 0.14).abs() < 1e-12);

        let mut w = PromiseWindow::new(1);
        w.push_value(0.5 + 0.9 * 2.0);
        w.push_reward(0.5);
        w.push_value(2.0);
        assert!(w.value_promise(0.9).unwrap().abs() < 1e-12);

        let mut w = PromiseWindow::new(3);
        for _ in 0..4 {
            w.push_value(0.0);
        }
        for _ in 0..3 {
            w.push_reward(0.0);
        }
        assert_eq!(w.value_promise(0.99), Some(0.0));
    }

    #[test]
    fn window_respects_capacity() {
        let mut w = PromiseWindow::new(2);
        for i in 0..10 {
            w.push_value(i as f64);
            w.push_reward(i as f64);
        }
        assert_eq!(w.len(), (3, 2));
    }
}
