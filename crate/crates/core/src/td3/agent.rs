use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::replay::Batch;
use crate::autodiff::{ActorNetwork, BindCritic, CriticModel, CriticNetwork, Graph, Matrix, NodeId, ParamVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    /// Std of target-policy smoothing noise, as a fraction of `max_action`.
    pub target_noise: f64,
    /// Clip of the smoothing noise, as a fraction of `max_action`.
    pub target_noise_clip: f64,
    /// Std of exploration noise, as a fraction of `max_action`.
    pub exploration_noise: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub adam: AdamConfig,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            batch_size: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            warmup_steps: 1000,
            buffer_capacity: 200_000,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            adam: AdamConfig::default(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("td3.{name} must lie in (0, 1], got {v}")));
            }
            Ok(())
        };
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("td3.gamma must lie in [0, 1), got {}", self.gamma)));
        }
        unit("tau", self.tau)?;
        unit("actor_lr", self.actor_lr)?;
        unit("critic_lr", self.critic_lr)?;
        if self.policy_delay == 0 {
            return Err(Error::Config("td3.policy_delay must be >= 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("td3.batch_size and td3.buffer_capacity must be positive".into()));
        }
        for (name, v) in [
            ("target_noise", self.target_noise),
            ("target_noise_clip", self.target_noise_clip),
            ("exploration_noise", self.exploration_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("td3.{name} must be >= 0, got {v}")));
            }
        }
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() {
            return Err(Error::Config("hidden layer lists must be nonempty".into()));
        }
        Ok(())
    }
}

/// Which auxiliary term a [`LossTerm`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AuxKind {
    MixedPartial,
    VectorField,
    Curvature,
}

/// A weighted scalar node added to the critic objective.
#[derive(Clone, Copy, Debug)]
pub struct LossTerm {
    pub kind: AuxKind,
    pub weight: f64,
    pub node: NodeId,
}

/// Graph handles for one minibatch.
#[derive(Clone, Copy, Debug)]
pub struct BatchNodes {
    pub s: NodeId,
    pub a: NodeId,
    pub s_next: NodeId,
    pub rows: usize,
}

/// Builds extra critic losses on the same graph as the TD loss.
pub trait AuxiliaryLoss {
    fn build(&mut self, g: &mut Graph, critic: &dyn CriticModel, batch: &BatchNodes) -> Result<Vec<LossTerm>>;
}

/// Loss values from one critic step. Auxiliary values are summed over both critics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriticUpdateReport {
    pub td: f64,
    pub mpr: Option<f64>,
    pub vfc: Option<f64>,
    pub curv: Option<f64>,
    pub total: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateReport {
    pub critic: CriticUpdateReport,
    pub actor_loss: Option<f64>,
}

/// `y = r + gamma * (1 - done) * min(Q1', Q2')(s', clip(pi'(s') + clip(noise)))`.
pub fn td_targets<R: Rng + ?Sized>(
    actor_target: &ActorNetwork,
    critic_targets: [&CriticNetwork; 2],
    batch: &Batch,
    cfg: &Td3Config,
    rng: &mut R,
) -> Result<Matrix> {
    let max_action = actor_target.max_action();
    let mut next_a = actor_target.act_batch(batch.s_next.view());
    let std = cfg.target_noise * max_action;
    if std > 0.0 {
        let clip = cfg.target_noise_clip * max_action;
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        next_a.mapv_inplace(|a| (a + normal.sample(rng).clamp(-clip, clip)).clamp(-max_action, max_action));
    }
    let q1 = critic_targets[0].forward_batch(batch.s_next.view(), next_a.view())?;
    let q2 = critic_targets[1].forward_batch(batch.s_next.view(), next_a.view())?;
    let mut y = Array2::zeros((batch.len(), 1));
    Zip::from(&mut y)
        .and(&batch.r)
        .and(&batch.done)
        .and(&q1)
        .and(&q2)
        .for_each(|y, &r, &done, &a, &b| *y = r + cfg.gamma * (1.0 - done) * a.min(b));
    Ok(y)
}

/// Sum over critics of the mean squared error against constant targets `y`.
pub fn td_loss(g: &mut Graph, critics: &[&dyn CriticModel], batch: &BatchNodes, y: &Matrix) -> Result<NodeId> {
    let yn = g.leaf(y.clone());
    let mut total: Option<NodeId> = None;
    for c in critics {
        let q = c.q_node(g, batch.s, batch.a)?;
        let err = g.sub(q, yn)?;
        let sq = g.square(err);
        let mse = g.mean(sq);
        total = Some(match total {
            None => mse,
            Some(t) => g.add(t, mse)?,
        });
    }
    total.ok_or_else(|| Error::InvalidArgument("no critics".into()))
}

/// Gradient of `-mean_s Q(s, pi(s))` with respect to the actor parameters.
pub fn actor_gradient(actor: &ActorNetwork, critic: &dyn BindCritic, s: &Matrix) -> Result<(f64, ParamVector)> {
    let mut g = Graph::new();
    let bound = actor.bind(&mut g)?;
    let model = critic.bind_model(&mut g)?;
    let sn = g.leaf(s.clone());
    let a = bound.forward_node(&mut g, sn)?;
    let q = model.q_node(&mut g, sn, a)?;
    let mean_q = g.mean(q);
    let loss = g.scale(mean_q, -1.0);
    let value = g.scalar(loss)?;
    Ok((value, bound.param_gradient(&mut g, loss)?))
}

/// Twin-critic agent with delayed policy updates and target smoothing.
#[derive(Clone, Debug)]
pub struct Td3Agent {
    cfg: Td3Config,
    pub actor: ActorNetwork,
    pub actor_target: ActorNetwork,
    pub critics: [CriticNetwork; 2],
    pub critic_targets: [CriticNetwork; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    critic_steps: u64,
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        max_action: f64,
        cfg: Td3Config,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.policy_delay == 0 || cfg.batch_size == 0 {
            return Err(Error::Config("policy_delay and batch_size must be positive".into()));
        }
        let actor = ActorNetwork::new(state_dim, action_dim, &cfg.actor_hidden, max_action, rng)?;
        let c1 = CriticNetwork::new(state_dim, action_dim, &cfg.critic_hidden, rng)?;
        let c2 = CriticNetwork::new(state_dim, action_dim, &cfg.critic_hidden, rng)?;
        Ok(Self::from_networks(cfg, actor, [c1, c2]))
    }

    /// Targets start as copies of the online networks.
    pub fn from_networks(cfg: Td3Config, actor: ActorNetwork, critics: [CriticNetwork; 2]) -> Self {
        let adam = cfg.adam;
        Self {
            actor_opt: Adam::new(actor.params().len(), adam),
            critic_opts: [
                Adam::new(critics[0].params().len(), adam),
                Adam::new(critics[1].params().len(), adam),
            ],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            cfg,
            critic_steps: 0,
        }
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    pub fn critic_steps(&self) -> u64 {
        self.critic_steps
    }

    /// `pi(s)`, plus clipped Gaussian exploration noise when `explore`.
    pub fn select_action<R: Rng + ?Sized>(&self, s: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.actor.act(s)?;
        let max_action = self.actor.max_action();
        let std = self.cfg.exploration_noise * max_action;
        if explore && std > 0.0 {
            let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for v in &mut a {
                *v = (*v + normal.sample(rng)).clamp(-max_action, max_action);
            }
        }
        Ok(a)
    }

    /// One optimizer step of both critics on `L_TD + sum_i w_i L_i`.
    ///
    /// `aux` is invoked once per critic. A non-finite total skips the step
    /// and sets [`CriticUpdateReport::skipped`].
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        aux: Option<&mut dyn AuxiliaryLoss>,
        rng: &mut R,
    ) -> Result<CriticUpdateReport> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let y = td_targets(
            &self.actor_target,
            [&self.critic_targets[0], &self.critic_targets[1]],
            batch,
            &self.cfg,
            rng,
        )?;
        let mut g = Graph::new();
        let b0 = self.critics[0].bind(&mut g)?;
        let b1 = self.critics[1].bind(&mut g)?;
        let nodes = BatchNodes {
            s: g.leaf(batch.s.clone()),
            a: g.leaf(batch.a.clone()),
            s_next: g.leaf(batch.s_next.clone()),
            rows: batch.len(),
        };
        let td = td_loss(&mut g, &[&b0, &b1], &nodes, &y)?;
        let mut report = CriticUpdateReport {
            td: g.scalar(td)?,
            ..Default::default()
        };
        let mut total = td;
        if let Some(aux) = aux {
            let mut terms = aux.build(&mut g, &b0, &nodes)?;
            terms.extend(aux.build(&mut g, &b1, &nodes)?);
            for t in terms {
                let v = g.scalar(t.node)?;
                let slot = match t.kind {
                    super::AuxKind::MixedPartial => &mut report.mpr,
                    super::AuxKind::VectorField => &mut report.vfc,
                    super::AuxKind::Curvature => &mut report.curv,
                };
                *slot = Some(slot.unwrap_or(0.0) + v);
                if t.weight != 0.0 {
                    let w = g.scale(t.node, t.weight);
                    total = g.add(total, w)?;
                }
            }
        }
        report.total = g.scalar(total)?;
        self.critic_steps += 1;
        if !report.total.is_finite() {
            report.skipped = true;
            return Ok(report);
        }
        let g0 = b0.param_gradient(&mut g, total)?;
        let g1 = b1.param_gradient(&mut g, total)?;
        if !g0.is_finite() || !g1.is_finite() {
            report.skipped = true;
            return Ok(report);
        }
        let lr = self.cfg.critic_lr;
        self.critic_opts[0].step(self.critics[0].params_mut(), &g0, lr)?;
        self.critic_opts[1].step(self.critics[1].params_mut(), &g1, lr)?;
        Ok(report)
    }

    /// Ascend `mean Q1(s, pi(s))`. Returns the actor loss before the step.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let (loss, grad) = actor_gradient(&self.actor, &self.critics[0], &batch.s)?;
        if grad.is_finite() {
            let lr = self.cfg.actor_lr;
            self.actor_opt.step(self.actor.params_mut(), &grad, lr)?;
        }
        Ok(loss)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.cfg.tau;
        self.actor_target.params_mut().polyak(self.actor.params(), tau)?;
        for (t, o) in self.critic_targets.iter_mut().zip(&self.critics) {
            t.params_mut().polyak(o.params(), tau)?;
        }
        Ok(())
    }

    /// Critic step, then every `policy_delay` critic steps an actor step and
    /// a soft update of all targets.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        aux: Option<&mut dyn AuxiliaryLoss>,
        rng: &mut R,
    ) -> Result<UpdateReport> {
        let critic = self.critic_update(batch, aux, rng)?;
        let mut actor_loss = None;
        if self.critic_steps % self.cfg.policy_delay as u64 == 0 {
            actor_loss = Some(self.actor_update(batch)?);
            self.soft_update_targets()?;
        }
        Ok(UpdateReport { critic, actor_loss })
    }
}
