//! Reverse-mode differentiation over small dense networks, including
//! gradients of losses built from input-gradients.

pub mod graph;
pub mod io;
pub mod mlp;
pub mod params;

pub use graph::{silu, silu_prime, silu_second, Graph, GraphStats, Matrix, NodeId, Op};
pub use mlp::{
    action_gradient, hvp_action, Activation, BindCritic, ActorNetwork, BoundActor, BoundCritic, BoundMlp, CriticModel,
    CriticNetwork, Mlp, OutputMap, HVP_FD_EPS,
};
pub use params::{LayerShape, ParamVector};
