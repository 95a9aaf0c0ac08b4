//! Deterministic symbolic household environment.
//!
//! Navigation is over a room-adjacency graph: one tick per room hop plus one
//! tick per `MoveTo` within a room. Each agent has two hands.

mod action;
mod class;
mod scene;
mod template;

pub(crate) use action::act_in_place;
pub use action::{is_legal, legal_actions, step, step_single, Action, Outcome};
pub use class::{Category, ClassName, UnknownClass};
pub use scene::{
    short_hash, state_diff, state_diff_where, Edge, Entity, EntityDoc, EntityId, Layout, Placement, Relation,
    SceneDoc, SceneGraph, HAND_CAPACITY, UNREACHABLE,
};
pub use template::{
    generate_apartment, ApartmentTemplate, FurnitureSpec, RoomSpec, SpawnRule, TEST_TEMPLATES,
    TRAIN_TEMPLATES,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("unsatisfiable config: {0}")]
    UnsatisfiableConfig(String),
    #[error("states have different entity sets")]
    IncomparableStates,
    #[error("malformed json: {0}")]
    Json(String),
}

#[cfg(test)]
mod tests;
