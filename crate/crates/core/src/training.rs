//! Off-line phase: TD(λ) learning of the value model from self-play.
//!
//! Training runs in synchronous batches. Every game of a batch plays
//! against the same weight snapshot, on its own random stream keyed by
//! (seed, batch, game). Per-game weight deltas are summed in game order and
//! applied once per batch, so the final weights do not depend on how many
//! workers ran the batch.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{run_match, ArenaError, MatchConfig};
use crate::game::{
    legal_plays_unchecked, opening_roll, roll_dice, Board, GameResult, MoveGen, Player,
    SAFETY_CAP,
};
use crate::pool::map_indexed;
use crate::rng::{stream_rng, StreamRng};
use crate::strategy::{GreedyStrategy, RandomStrategy};
use crate::valuation::{encode, greedy_after, FeatureVector, ValueModel, DIMENSION};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("self-play game exceeded {SAFETY_CAP} plies")]
    SafetyCap,
    #[error(transparent)]
    Valuation(#[from] crate::valuation::ValuationError),
    #[error("benchmark match failed: {0}")]
    Benchmark(#[from] Box<ArenaError>),
}

/// One recorded after-state, encoded for the side to move.
#[derive(Clone, Debug)]
pub struct Step {
    pub features: FeatureVector,
    pub value: f64,
    /// Side to move at this after-state; the encoding's point of view.
    pub perspective: Player,
    /// Reached through an exploratory (random) move.
    pub explored: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub result: GameResult,
}

impl Trajectory {
    /// Terminal reward for `player`: 1 if it won.
    pub fn outcome(&self, player: Player) -> f64 {
        if self.result.winner == player {
            1.0
        } else {
            0.0
        }
    }

    /// Reward seen by step `i`.
    pub fn step_outcome(&self, i: usize) -> f64 {
        self.outcome(self.steps[i].perspective)
    }

    fn stream(&self, player: Player) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(move |s| s.perspective == player)
    }

    /// Raw one-step TD errors of each perspective stream, exploration ignored.
    pub fn td_errors(&self, player: Player) -> Vec<f64> {
        let values: Vec<f64> = self.stream(player).map(|s| s.value).collect();
        let z = self.outcome(player);
        (0..values.len())
            .map(|t| values.get(t + 1).copied().unwrap_or(z) - values[t])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub games: u64,
    pub workers: usize,
    pub batch_games: u64,
    pub seed: u64,
    /// Games per benchmark match against the random player; 0 disables it.
    pub eval_games: usize,
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            lambda: 0.7,
            epsilon: 0.02,
            games: 20_000,
            workers: 1,
            batch_games: 64,
            seed: 1,
            eval_games: 200,
            eval_seed: 0x5eed_e7a1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let fail = |m: &str| Err(TrainingError::Config(m.to_string()));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail("alpha must be a finite number >= 0");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail("lambda must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail("epsilon must lie in [0, 1]");
        }
        if self.games < 1 {
            return fail("games must be >= 1");
        }
        if self.workers < 1 {
            return fail("workers must be >= 1");
        }
        if self.batch_games < 1 || self.batch_games > self.games {
            return fail("batch_games must lie in [1, games]");
        }
        Ok(())
    }
}

/// One line of the learning curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub batch: u64,
    pub games: u64,
    pub mean_abs_delta: f64,
    pub winrate_vs_random: Option<f64>,
}

/// Plays one game with both sides on the greedy policy of `model`.
///
/// With probability `epsilon` a mover instead picks uniformly among its
/// legal plays; the resulting after-state is flagged as explored.
pub fn self_play_game(
    model: &ValueModel,
    rng: &mut StreamRng,
    epsilon: f64,
) -> Result<Trajectory, TrainingError> {
    let mut gen = MoveGen::new();
    let mut board = Board::initial();
    let (mut to_move, mut roll) = opening_roll(rng);
    let mut steps = Vec::with_capacity(128);
    for ply in 0..SAFETY_CAP {
        if ply > 0 {
            roll = roll_dice(rng);
        }
        let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        let (after, explored) = if explore {
            let plays = legal_plays_unchecked(&board, to_move, roll);
            let pick = plays.choose(rng).expect("at least a pass");
            (pick.after, plays.len() > 1)
        } else {
            (greedy_after(model, &mut gen, &board, to_move, roll), false)
        };
        board = after;
        if let Some(result) = board.terminal() {
            return Ok(Trajectory { steps, result });
        }
        to_move = to_move.opponent();
        let features = encode(&board, to_move)?;
        let value = model.value_of_features(&features);
        steps.push(Step {
            features,
            value,
            perspective: to_move,
            explored,
        });
    }
    Err(TrainingError::SafetyCap)
}

/// Accumulated TD(λ) weight change for one trajectory.
///
/// Each perspective stream is processed on its own with accumulating
/// traces: `e <- λ e + ∇V(x_t)`, `δ_t = V_{t+1} - V_t` (the last target is
/// the stream's terminal reward), `Δw += α δ_t e`. A transition into an
/// explored step contributes nothing and the trace restarts at that step.
pub fn td_update(model: &ValueModel, trajectory: &Trajectory, alpha: f64, lambda: f64) -> Vec<f64> {
    td_delta(model, trajectory, alpha, lambda).0
}

/// Returns (delta, sum of |δ| over all transitions, transition count).
fn td_delta(
    model: &ValueModel,
    trajectory: &Trajectory,
    alpha: f64,
    lambda: f64,
) -> (Vec<f64>, f64, usize) {
    let mut delta = vec![0.0; DIMENSION];
    let mut trace = vec![0.0; DIMENSION];
    let mut abs_sum = 0.0;
    let mut count = 0;
    for player in Player::BOTH {
        let stream: Vec<&Step> = trajectory.stream(player).collect();
        let z = trajectory.outcome(player);
        trace.iter_mut().for_each(|e| *e = 0.0);
        for (t, step) in stream.iter().enumerate() {
            if step.explored {
                trace.iter_mut().for_each(|e| *e = 0.0);
            }
            let g = model.grad(&step.features);
            for (e, gi) in trace.iter_mut().zip(&g) {
                *e = lambda * *e + gi;
            }
            let next = stream.get(t + 1);
            let target = next.map_or(z, |s| s.value);
            let td = target - step.value;
            abs_sum += td.abs();
            count += 1;
            if next.is_some_and(|s| s.explored) {
                continue;
            }
            for (d, e) in delta.iter_mut().zip(&trace) {
                *d += alpha * td * e;
            }
        }
    }
    (delta, abs_sum, count)
}

pub fn train(config: &TrainConfig) -> Result<(ValueModel, Vec<CurveEntry>), TrainingError> {
    train_with(config, |_| {})
}

/// [`train`] with a callback invoked after every batch (used to stream the log).
pub fn train_with(
    config: &TrainConfig,
    mut on_batch: impl FnMut(&CurveEntry),
) -> Result<(ValueModel, Vec<CurveEntry>), TrainingError> {
    config.validate()?;
    let mut model = ValueModel::zeros();
    let mut curve = Vec::new();
    let mut played = 0u64;
    let mut batch = 0u64;
    while played < config.games {
        let n = config.batch_games.min(config.games - played) as usize;
        let snapshot = &model;
        let outcomes = map_indexed(config.workers, n, |game| {
            let mut rng = stream_rng(&[config.seed, batch, game as u64]);
            let trajectory = self_play_game(snapshot, &mut rng, config.epsilon)?;
            Ok::<_, TrainingError>(td_delta(snapshot, &trajectory, config.alpha, config.lambda))
        });
        let mut total = vec![0.0; DIMENSION];
        let mut abs_sum = 0.0;
        let mut count = 0usize;
        for outcome in outcomes {
            let (delta, s, c) = outcome?;
            for (t, d) in total.iter_mut().zip(&delta) {
                *t += d;
            }
            abs_sum += s;
            count += c;
        }
        model = model.with_delta(&total)?;
        played += n as u64;
        let winrate = if config.eval_games > 0 {
            Some(benchmark_vs_random(&model, config)?)
        } else {
            None
        };
        let entry = CurveEntry {
            batch,
            games: played,
            mean_abs_delta: if count > 0 { abs_sum / count as f64 } else { 0.0 },
            winrate_vs_random: winrate,
        };
        log::debug!(
            "batch {} games {} mean|δ| {:.4} vs random {:?}",
            entry.batch,
            entry.games,
            entry.mean_abs_delta,
            entry.winrate_vs_random
        );
        on_batch(&entry);
        curve.push(entry);
        batch += 1;
    }
    Ok((model, curve))
}

fn benchmark_vs_random(model: &ValueModel, config: &TrainConfig) -> Result<f64, TrainingError> {
    let greedy = GreedyStrategy::new(model.clone().into());
    let random = RandomStrategy;
    let report = run_match(
        &greedy,
        &random,
        &MatchConfig {
            games: config.eval_games,
            seed: config.eval_seed,
            workers: config.workers,
            keep_transcripts: false,
        },
    )
    .map_err(Box::new)?;
    Ok(report.win_fraction_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::WinKind;

    fn unit_features(i: usize) -> FeatureVector {
        let mut v = vec![0.0; DIMENSION];
        v[i] = 1.0;
        v[196] = 1.0;
        FeatureVector::from_slice(&v).unwrap()
    }

    #[test]
    fn single_step_update() {
        let x = unit_features(10);
        let traj = Trajectory {
            steps: vec![Step {
                features: x.clone(),
                value: 0.5,
                perspective: Player::White,
                explored: false,
            }],
            result: GameResult {
                winner: Player::White,
                kind: WinKind::Single,
            },
        };
        let m = ValueModel::zeros();
        for lambda in [0.0, 0.3, 1.0] {
            let d = td_update(&m, &traj, 0.1, lambda);
            for (di, xi) in d.iter().zip(x.as_slice()) {
                assert!((di - 0.1 * 0.5 * 0.25 * xi).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_model_self_play_records_one_half() {
        let mut rng = stream_rng(&[9]);
        let t = self_play_game(&ValueModel::zeros(), &mut rng, 0.0).unwrap();
        assert!(!t.steps.is_empty());
        assert!(t.steps.iter().all(|s| s.value == 0.5));
    }

    #[test]
    fn greedy_self_play_is_deterministic() {
        let m = ValueModel::zeros();
        let a = self_play_game(&m, &mut stream_rng(&[4]), 0.0).unwrap();
        let b = self_play_game(&m, &mut stream_rng(&[4]), 0.0).unwrap();
        assert_eq!(a.result, b.result);
        assert_eq!(a.steps.len(), b.steps.len());
        assert!(a
            .steps
            .iter()
            .zip(&b.steps)
            .all(|(x, y)| x.features == y.features && x.value == y.value));
    }

    #[test]
    fn random_self_play_terminates() {
        let mut rng = stream_rng(&[5]);
        let t = self_play_game(&ValueModel::zeros(), &mut rng, 1.0).unwrap();
        assert!(t.steps.iter().any(|s| s.explored));
    }

    #[test]
    fn exploration_breaks_the_stream_update() {
        // Two White steps; the second was reached by exploration, so only the
        // final step's update (towards z) survives.
        let x0 = unit_features(3);
        let x1 = unit_features(7);
        let traj = Trajectory {
            steps: vec![
                Step {
                    features: x0,
                    value: 0.5,
                    perspective: Player::White,
                    explored: false,
                },
                Step {
                    features: x1.clone(),
                    value: 0.5,
                    perspective: Player::White,
                    explored: true,
                },
            ],
            result: GameResult {
                winner: Player::Red,
                kind: WinKind::Single,
            },
        };
        let d = td_update(&ValueModel::zeros(), &traj, 1.0, 1.0);
        assert_eq!(d[3], 0.0);
        assert_eq!(d[7], -0.5 * 0.25);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { games: 0, ..ok.clone() },
            TrainConfig { lambda: 1.5, ..ok.clone() },
            TrainConfig { workers: 0, ..ok.clone() },
            TrainConfig { batch_games: 30_000, ..ok.clone() },
            TrainConfig { alpha: f64::NAN, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(TrainingError::Config(_))));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_zero_model() {
        let config = TrainConfig {
            alpha: 0.0,
            games: 16,
            batch_games: 8,
            eval_games: 0,
            ..TrainConfig::default()
        };
        let (m, curve) = train(&config).unwrap();
        assert_eq!(m, ValueModel::zeros());
        assert_eq!(curve.len(), 2);
        assert_eq!(curve[1].games, 16);
    }
}
