use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 3;
pub const ACTION_DIM: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_torque: f64,
    pub max_steps: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_speed: 8.0,
            max_torque: 2.0,
            max_steps: 200,
        }
    }
}

/// `theta = 0` is upright.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// `(cos theta, sin theta, theta_dot)`.
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Always false: the task has no terminal states.
    pub done: bool,
    pub truncated: bool,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Pendulum swing-up with semi-implicit Euler integration.
#[derive(Clone, Debug)]
pub struct Pendulum {
    cfg: PendulumConfig,
    state: PendulumState,
    steps: usize,
}

impl Pendulum {
    pub fn new(cfg: PendulumConfig) -> Self {
        Self {
            cfg,
            state: PendulumState {
                theta: PI,
                theta_dot: 0.0,
            },
            steps: 0,
        }
    }

    pub fn config(&self) -> &PendulumConfig {
        &self.cfg
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.state.theta.cos(), self.state.theta.sin(), self.state.theta_dot]
    }

    /// `theta ~ U(-pi, pi)`, `theta_dot ~ U(-1, 1)` from a generator seeded with `seed`.
    pub fn reset(&mut self, seed: u64) -> StepResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        self.reset_to(PendulumState { theta, theta_dot })
    }

    pub fn reset_to(&mut self, state: PendulumState) -> StepResult {
        self.state = state;
        self.steps = 0;
        StepResult {
            observation: self.observation(),
            reward: 0.0,
            done: false,
            truncated: false,
        }
    }

    /// Apply torque `u` (clamped to the torque box) for one `dt`.
    pub fn step(&mut self, u: f64) -> Result<StepResult> {
        if !u.is_finite() {
            return Err(Error::NonFinite("pendulum torque"));
        }
        let c = &self.cfg;
        let u = u.clamp(-c.max_torque, c.max_torque);
        let PendulumState { theta, theta_dot } = self.state;
        let wrapped = wrap_angle(theta);
        let reward = -(wrapped * wrapped + 0.1 * theta_dot * theta_dot + 0.001 * u * u);

        let accel = 3.0 * c.gravity / (2.0 * c.length) * theta.sin() + 3.0 / (c.mass * c.length * c.length) * u;
        let new_dot = (theta_dot + accel * c.dt).clamp(-c.max_speed, c.max_speed);
        let new_theta = theta + new_dot * c.dt;
        self.state = PendulumState {
            theta: new_theta,
            theta_dot: new_dot,
        };
        self.steps += 1;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: false,
            truncated: self.steps >= self.cfg.max_steps,
        })
    }

    /// Mechanical energy of the uniform rod, zero at the horizontal.
    pub fn energy(&self) -> f64 {
        let c = &self.cfg;
        let inertia = c.mass * c.length * c.length / 3.0;
        0.5 * inertia * self.state.theta_dot.powi(2) + c.mass * c.gravity * 0.5 * c.length * self.state.theta.cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(theta: f64, theta_dot: f64) -> Pendulum {
        let mut p = Pendulum::new(PendulumConfig::default());
        p.reset_to(PendulumState { theta, theta_dot });
        p
    }

    #[test]
    fn hanging_rest_is_stable() {
        let mut p = at(PI, 0.0);
        let r = p.step(0.0).unwrap();
        assert!((r.reward + PI * PI).abs() < 1e-12);
        assert!((p.state().theta - PI).abs() < 1e-12);
    }

    #[test]
    fn upright_equilibrium() {
        let mut p = at(0.0, 0.0);
        let r = p.step(0.0).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(p.state().theta, 0.0);
    }

    #[test]
    fn horizontal_acceleration() {
        let mut p = at(PI / 2.0, 0.0);
        p.step(0.0).unwrap();
        assert!((p.state().theta_dot - 0.75).abs() < 1e-12);
    }

    #[test]
    fn torque_and_speed_are_clamped() {
        let mut p = at(0.3, 7.9);
        let r = p.step(100.0).unwrap();
        assert!(p.state().theta_dot <= 8.0);
        assert!((r.reward + (0.09 + 0.1 * 7.9 * 7.9 + 0.001 * 4.0)).abs() < 1e-12);
        assert!(p.step(f64::NAN).is_err());
    }

    #[test]
    fn truncates_at_horizon() {
        let mut p = Pendulum::new(PendulumConfig::default());
        p.reset(5);
        for t in 1..=200 {
            let r = p.step(0.5).unwrap();
            assert!(!r.done);
            assert_eq!(r.truncated, t == 200);
            let o = &r.observation;
            assert!((o[0] * o[0] + o[1] * o[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reset_is_seeded() {
        let mut p = Pendulum::new(PendulumConfig::default());
        let a = p.reset(42);
        let b = p.reset(42);
        assert_eq!(a, b);
        assert_ne!(p.reset(43), a);
    }

    #[test]
    fn reset_theta_mean_is_centered() {
        let mut p = Pendulum::new(PendulumConfig::default());
        let n = 10_000;
        let thetas: Vec<f64> = (0..n)
            .map(|i| {
                p.reset(i as u64);
                p.state().theta
            })
            .collect();
        let mean = thetas.iter().sum::<f64>() / n as f64;
        // U(-pi, pi) has variance pi^2 / 3
        let se = (PI * PI / 3.0 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
