//! Move-selection strategies and the registry that builds them by name.
//!
//! A player spec is `name` or `name:key=value,key=value`, e.g.
//! `rollout:samples=54,workers=4`. Built-in names are `random`, `greedy`,
//! `worst` and `rollout`; further strategies can be registered at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use thiserror::Error;

use crate::game::{legal_plays_unchecked, Board, DiceRoll, Play, PlayError, Player};
use crate::rng::{stream_seed, StreamRng};
use crate::rollout::{rollout_decide, RolloutConfig, RolloutError};
use crate::valuation::{greedy_play, ValueModel};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown strategy `{0}` (known: {1})")]
    Unknown(String, String),
    #[error("strategy `{0}` needs a weight file")]
    MissingModel(String),
    #[error("bad option `{key}` for `{strategy}`: {message}")]
    BadOption {
        strategy: String,
        key: String,
        message: String,
    },
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Play(#[from] PlayError),
}

/// Per-decision context supplied by the game driver.
pub struct TurnContext<'a> {
    pub game_seed: u64,
    pub ply: u32,
    /// Private stream of the seat; never shared with the dice.
    pub rng: &'a mut StreamRng,
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> String;

    fn choose(
        &self,
        board: &Board,
        player: Player,
        roll: DiceRoll,
        ctx: &mut TurnContext<'_>,
    ) -> Result<Play, StrategyError>;
}

/// Uniform choice among distinct legal plays.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomStrategy;

impl Strategy for RandomStrategy {
    fn name(&self) -> String {
        "random".into()
    }

    fn choose(
        &self,
        board: &Board,
        player: Player,
        roll: DiceRoll,
        ctx: &mut TurnContext<'_>,
    ) -> Result<Play, StrategyError> {
        let plays = legal_plays_unchecked(board, player, roll);
        Ok(plays.choose(ctx.rng).expect("at least a pass").clone())
    }
}

#[derive(Clone, Debug)]
pub struct GreedyStrategy {
    model: Arc<ValueModel>,
}

impl GreedyStrategy {
    pub fn new(model: Arc<ValueModel>) -> GreedyStrategy {
        GreedyStrategy { model }
    }
}

impl Strategy for GreedyStrategy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn choose(
        &self,
        board: &Board,
        player: Player,
        roll: DiceRoll,
        _ctx: &mut TurnContext<'_>,
    ) -> Result<Play, StrategyError> {
        Ok(greedy_play(&self.model, board, player, roll))
    }
}

/// Pathological player: the statically worst play, first in canonical order on ties.
#[derive(Clone, Debug)]
pub struct WorstStrategy {
    model: Arc<ValueModel>,
}

impl WorstStrategy {
    pub fn new(model: Arc<ValueModel>) -> WorstStrategy {
        WorstStrategy { model }
    }
}

impl Strategy for WorstStrategy {
    fn name(&self) -> String {
        "worst".into()
    }

    fn choose(
        &self,
        board: &Board,
        player: Player,
        roll: DiceRoll,
        _ctx: &mut TurnContext<'_>,
    ) -> Result<Play, StrategyError> {
        let plays = legal_plays_unchecked(board, player, roll);
        let mut worst = 0;
        let mut worst_key = f64::NEG_INFINITY;
        for (i, p) in plays.iter().enumerate() {
            let key = self.model.after_key(&p.after, player);
            if i == 0 || key > worst_key {
                worst = i;
                worst_key = key;
            }
        }
        Ok(plays[worst].clone())
    }
}

/// Rollout decisions; the dice streams of each decision are keyed by
/// (seed_base, game seed, ply) so whole games replay exactly.
#[derive(Clone, Debug)]
pub struct RolloutStrategy {
    model: Arc<ValueModel>,
    config: RolloutConfig,
}

impl RolloutStrategy {
    pub fn new(model: Arc<ValueModel>, config: RolloutConfig) -> Result<RolloutStrategy, StrategyError> {
        config.validate()?;
        Ok(RolloutStrategy { model, config })
    }

    pub fn config(&self) -> &RolloutConfig {
        &self.config
    }

    pub fn decision_config(&self, game_seed: u64, ply: u32) -> RolloutConfig {
        RolloutConfig {
            seed_base: stream_seed(&[self.config.seed_base, game_seed, ply as u64]),
            ..self.config.clone()
        }
    }
}

impl Strategy for RolloutStrategy {
    fn name(&self) -> String {
        format!("rollout({} samples)", self.config.samples_per_candidate)
    }

    fn choose(
        &self,
        board: &Board,
        player: Player,
        roll: DiceRoll,
        ctx: &mut TurnContext<'_>,
    ) -> Result<Play, StrategyError> {
        let config = self.decision_config(ctx.game_seed, ctx.ply);
        Ok(rollout_decide(&self.model, board, player, roll, &config)?.play)
    }
}

/// Wraps the model and rollout settings as a move-selection strategy.
pub fn rollout_player(model: Arc<ValueModel>, config: RolloutConfig) -> Result<RolloutStrategy, StrategyError> {
    RolloutStrategy::new(model, config)
}

/// Inputs available to strategy factories.
#[derive(Clone, Debug, Default)]
pub struct BuildContext {
    pub model: Option<Arc<ValueModel>>,
    pub rollout: RolloutConfig,
}

pub type Factory = Box<
    dyn Fn(&BuildContext, &BTreeMap<String, String>) -> Result<Box<dyn Strategy>, StrategyError>
        + Send
        + Sync,
>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

fn require_model(ctx: &BuildContext, name: &str) -> Result<Arc<ValueModel>, StrategyError> {
    ctx.model
        .clone()
        .ok_or_else(|| StrategyError::MissingModel(name.to_string()))
}

fn parse_opt<T: std::str::FromStr>(strategy: &str, key: &str, value: &str) -> Result<T, StrategyError> {
    value.parse().map_err(|_| StrategyError::BadOption {
        strategy: strategy.to_string(),
        key: key.to_string(),
        message: format!("cannot parse `{value}`"),
    })
}

fn no_options(name: &str, options: &BTreeMap<String, String>) -> Result<(), StrategyError> {
    match options.keys().next() {
        Some(key) => Err(StrategyError::BadOption {
            strategy: name.to_string(),
            key: key.clone(),
            message: "takes no options".into(),
        }),
        None => Ok(()),
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        StrategyRegistry::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> StrategyRegistry {
        StrategyRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> StrategyRegistry {
        let mut registry = StrategyRegistry::empty();
        registry.register("random", |_, opts| {
            no_options("random", opts)?;
            Ok(Box::new(RandomStrategy))
        });
        registry.register("greedy", |ctx, opts| {
            no_options("greedy", opts)?;
            Ok(Box::new(GreedyStrategy::new(require_model(ctx, "greedy")?)))
        });
        registry.register("worst", |ctx, opts| {
            no_options("worst", opts)?;
            Ok(Box::new(WorstStrategy::new(require_model(ctx, "worst")?)))
        });
        registry.register("rollout", |ctx, opts| {
            let model = require_model(ctx, "rollout")?;
            let mut config = ctx.rollout.clone();
            for (key, value) in opts {
                match key.as_str() {
                    "samples" => config.samples_per_candidate = parse_opt("rollout", key, value)?,
                    "workers" => config.workers = parse_opt("rollout", key, value)?,
                    "seed" => config.seed_base = parse_opt("rollout", key, value)?,
                    "cap" => config.candidate_cap = Some(parse_opt("rollout", key, value)?),
                    "score" => config.score = parse_opt("rollout", key, value)?,
                    _ => {
                        return Err(StrategyError::BadOption {
                            strategy: "rollout".into(),
                            key: key.clone(),
                            message: "unknown option".into(),
                        })
                    }
                }
            }
            Ok(Box::new(RolloutStrategy::new(model, config)?))
        });
        registry
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BuildContext, &BTreeMap<String, String>) -> Result<Box<dyn Strategy>, StrategyError>
            + Send
            + Sync
            + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    /// Builds a strategy from a `name[:key=value,...]` spec.
    pub fn build(&self, spec: &str, ctx: &BuildContext) -> Result<Box<dyn Strategy>, StrategyError> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let name = name.trim();
        let mut options = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| StrategyError::BadOption {
                strategy: name.to_string(),
                key: pair.to_string(),
                message: "expected key=value".into(),
            })?;
            options.insert(k.trim().to_string(), v.trim().to_string());
        }
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| StrategyError::Unknown(name.to_string(), self.names().join(", ")))?;
        factory(ctx, &options)
    }
}
