//! Core of a modular reinforcement-learning framework: environments,
//! declarative dense networks with hand-written backpropagation, and the
//! learner engine with its monitor and factory.

pub mod env;
pub mod learn;
pub mod net;
pub mod wire;
