//! Backgammon engine that learns a linear win-probability model by TD(λ)
//! self-play and improves its move choice on-line with Monte-Carlo rollouts.
//!
//! Modules, bottom-up:
//! - [`game`]: rules, dice and legal play generation
//! - [`valuation`]: feature encoding, logistic-linear value model, greedy policy
//! - [`training`]: parallel self-play TD(λ) trainer
//! - [`rollout`]: rollout estimates and the rollout decision procedure
//! - [`strategy`]: move-selection strategies and the name registry
//! - [`arena`]: games and matches between strategies

pub mod arena;
pub mod game;
pub mod rng;
pub mod rollout;
pub mod strategy;
pub mod training;
pub mod valuation;

pub(crate) mod pool;
