//! Contextual bandit over beam sizes.
//!
//! Each arm is one beam width. The context is a five-component vector built
//! from the partial twist sentence; the reward of an arm is the best
//! arousal-minus-penalties score over the beam it produced. Arms are chosen
//! with LinUCB and scored offline by cumulative regret against the best arm.

mod context;
mod linucb;
mod payoff;
mod regret;
mod trigger;

pub use context::{build_context, BanditContext, ContextScaling, CONTEXT_DIM};
pub use linucb::{ArmState, LinUcbState};
pub use payoff::{payoff, PayoffConfig};
pub use regret::{
    offline_regret, parse_episodes, recorded_regret, replay_regret, write_episodes, EpisodeStep,
};
pub use trigger::{ConstantTrigger, RemoteTrigger, TableTrigger, TriggerHandle, TriggerPredictor};
