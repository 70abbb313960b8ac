//! On-line phase: Monte-Carlo rollouts of every legal play.
//!
//! Each candidate after-state is played out to the end many times with
//! both sides on the greedy policy, and the candidate with the best
//! observed score is chosen. Sample `i` of a candidate always uses the
//! dice stream keyed by (seed_base, candidate id, i), where the candidate
//! id is the fingerprint of its after-state. Results therefore do not
//! depend on worker count, scheduling or candidate order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    legal_plays, roll_dice, Board, DiceRoll, GameResult, MoveGen, Play, PlayError, Player,
    WinKind, SAFETY_CAP,
};
use crate::pool::map_indexed;
use crate::rng::stream_rng;
use crate::valuation::{greedy_after, ValueModel};

/// Samples per scheduling unit.
const CHUNK: u64 = 12;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("rollout game exceeded {SAFETY_CAP} plies")]
    SafetyCap,
    #[error("invalid rollout config: {0}")]
    Config(String),
    #[error(transparent)]
    Play(#[from] PlayError),
}

/// Rollout tally from the decision maker's point of view.
///
/// `gammon_*` count gammons only; backgammons are tallied separately.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinStats {
    pub n: u64,
    pub wins: u64,
    pub gammon_wins: u64,
    pub gammon_losses: u64,
    pub backgammon_wins: u64,
    pub backgammon_losses: u64,
}

impl WinStats {
    pub fn record(&mut self, result: &GameResult, decision_maker: Player) {
        self.record_many(result, decision_maker, 1);
    }

    fn record_many(&mut self, result: &GameResult, decision_maker: Player, count: u64) {
        self.n += count;
        let won = result.winner == decision_maker;
        if won {
            self.wins += count;
        }
        match (result.kind, won) {
            (WinKind::Gammon, true) => self.gammon_wins += count,
            (WinKind::Gammon, false) => self.gammon_losses += count,
            (WinKind::Backgammon, true) => self.backgammon_wins += count,
            (WinKind::Backgammon, false) => self.backgammon_losses += count,
            (WinKind::Single, _) => {}
        }
    }

    pub fn merge(&mut self, other: &WinStats) {
        self.n += other.n;
        self.wins += other.wins;
        self.gammon_wins += other.gammon_wins;
        self.gammon_losses += other.gammon_losses;
        self.backgammon_wins += other.backgammon_wins;
        self.backgammon_losses += other.backgammon_losses;
    }

    pub fn losses(&self) -> u64 {
        self.n - self.wins
    }

    pub fn p_hat(&self) -> Option<f64> {
        (self.n > 0).then(|| self.wins as f64 / self.n as f64)
    }

    pub fn stderr(&self) -> Option<f64> {
        let p = self.p_hat()?;
        Some((p * (1.0 - p) / self.n as f64).sqrt())
    }

    /// Average points per game on the 1/2/3 scale.
    pub fn equity(&self) -> Option<f64> {
        (self.n > 0).then(|| {
            let points = self.wins as f64 - self.losses() as f64
                + (self.gammon_wins as f64 - self.gammon_losses as f64)
                + 2.0 * (self.backgammon_wins as f64 - self.backgammon_losses as f64);
            points / self.n as f64
        })
    }

    pub fn score(&self, score: Score) -> Option<f64> {
        match score {
            Score::WinFraction => self.p_hat(),
            Score::Equity => self.equity(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    #[default]
    WinFraction,
    Equity,
}

impl std::str::FromStr for Score {
    type Err = RolloutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "win_fraction" => Ok(Score::WinFraction),
            "equity" => Ok(Score::Equity),
            other => Err(RolloutError::Config(format!("unknown score `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub samples_per_candidate: u64,
    pub workers: usize,
    pub seed_base: u64,
    /// Roll out only the best `k` candidates by static value.
    pub candidate_cap: Option<usize>,
    pub score: Score,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            samples_per_candidate: 108,
            workers: 1,
            seed_base: 0,
            candidate_cap: None,
            score: Score::WinFraction,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.samples_per_candidate < 1 {
            return Err(RolloutError::Config("samples_per_candidate must be >= 1".into()));
        }
        if self.workers < 1 {
            return Err(RolloutError::Config("workers must be >= 1".into()));
        }
        if self.candidate_cap == Some(0) {
            return Err(RolloutError::Config("candidate_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Where the dice of a candidate's samples come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleSeeds {
    pub seed_base: u64,
    pub candidate_id: u64,
}

impl SampleSeeds {
    pub fn for_after_state(seed_base: u64, after: &Board) -> SampleSeeds {
        SampleSeeds {
            seed_base,
            candidate_id: after.fingerprint(),
        }
    }
}

/// Plays one game from `board` with `to_move` rolling first, greedy on both sides.
fn simulate(
    model: &ValueModel,
    gen: &mut MoveGen,
    board: &Board,
    mut to_move: Player,
    seeds: SampleSeeds,
    sample: u64,
) -> Result<GameResult, RolloutError> {
    let mut rng = stream_rng(&[seeds.seed_base, seeds.candidate_id, sample]);
    let mut board = *board;
    for _ in 0..SAFETY_CAP {
        if let Some(result) = board.terminal() {
            return Ok(result);
        }
        let roll = roll_dice(&mut rng);
        board = greedy_after(model, gen, &board, to_move, roll);
        to_move = to_move.opponent();
    }
    Err(RolloutError::SafetyCap)
}

fn run_samples(
    model: &ValueModel,
    after: &Board,
    opponent_to_move: Player,
    seeds: SampleSeeds,
    range: std::ops::Range<u64>,
) -> Result<WinStats, RolloutError> {
    let decision_maker = opponent_to_move.opponent();
    let mut stats = WinStats::default();
    let mut gen = MoveGen::new();
    for sample in range {
        let result = simulate(model, &mut gen, after, opponent_to_move, seeds, sample)?;
        stats.record(&result, decision_maker);
    }
    Ok(stats)
}

/// Monte-Carlo estimate of the decision maker's chances after a candidate play.
///
/// `opponent_to_move` rolls first; the decision maker is its opponent. A
/// finished `after` yields `n` copies of its known outcome.
pub fn rollout_estimate(
    model: &ValueModel,
    after: &Board,
    opponent_to_move: Player,
    n: u64,
    seeds: SampleSeeds,
    workers: usize,
) -> Result<WinStats, RolloutError> {
    let decision_maker = opponent_to_move.opponent();
    if let Some(result) = after.terminal() {
        let mut stats = WinStats::default();
        stats.record_many(&result, decision_maker, n);
        return Ok(stats);
    }
    let chunks = n.div_ceil(CHUNK) as usize;
    let parts = map_indexed(workers, chunks, |c| {
        let start = c as u64 * CHUNK;
        run_samples(model, after, opponent_to_move, seeds, start..(start + CHUNK).min(n))
    });
    let mut stats = WinStats::default();
    for part in parts {
        stats.merge(&part?);
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateReport {
    pub play: Play,
    /// Model win probability of the decision maker after this play.
    pub static_value: f64,
    pub stats: WinStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutDecision {
    pub play: Play,
    pub chosen_index: usize,
    pub candidates: Vec<CandidateReport>,
}

/// Rolls out every legal play (or the best `candidate_cap` by static value)
/// and returns the one with the highest score, ties to canonical order.
pub fn rollout_decide(
    model: &ValueModel,
    board: &Board,
    player: Player,
    roll: DiceRoll,
    config: &RolloutConfig,
) -> Result<RolloutDecision, RolloutError> {
    config.validate()?;
    let plays = legal_plays(board, player, roll)?;
    let static_value = |after: &Board| 1.0 - model.value(after, player.opponent());

    if plays.len() == 1 {
        let play = plays.into_iter().next().expect("one play");
        // a known outcome costs nothing; otherwise no simulation is needed
        let stats = if play.after.terminal().is_some() {
            rollout_estimate(
                model,
                &play.after,
                player.opponent(),
                config.samples_per_candidate,
                SampleSeeds::for_after_state(config.seed_base, &play.after),
                1,
            )?
        } else {
            WinStats::default()
        };
        return Ok(RolloutDecision {
            candidates: vec![CandidateReport {
                static_value: static_value(&play.after),
                play: play.clone(),
                stats,
            }],
            play,
            chosen_index: 0,
        });
    }

    let mut candidates = plays;
    if let Some(cap) = config.candidate_cap {
        if candidates.len() > cap {
            let mut ranked: Vec<(f64, usize)> = candidates
                .iter()
                .enumerate()
                .map(|(i, p)| (model.after_key(&p.after, player), i))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut keep: Vec<usize> = ranked[..cap].iter().map(|&(_, i)| i).collect();
            keep.sort_unstable();
            candidates = keep.into_iter().map(|i| candidates[i].clone()).collect();
        }
    }

    let n = config.samples_per_candidate;
    let chunks = n.div_ceil(CHUNK) as usize;
    let opponent = player.opponent();
    let tasks = candidates.len() * chunks;
    let parts = map_indexed(config.workers, tasks, |task| {
        let (c, chunk) = (task / chunks, task % chunks);
        let after = &candidates[c].after;
        let seeds = SampleSeeds::for_after_state(config.seed_base, after);
        if after.terminal().is_some() {
            // whole candidate handled by its first chunk
            return if chunk == 0 {
                rollout_estimate(model, after, opponent, n, seeds, 1)
            } else {
                Ok(WinStats::default())
            };
        }
        let start = chunk as u64 * CHUNK;
        run_samples(model, after, opponent, seeds, start..(start + CHUNK).min(n))
    });
    let mut stats = vec![WinStats::default(); candidates.len()];
    for (task, part) in parts.into_iter().enumerate() {
        stats[task / chunks].merge(&part?);
    }

    let mut chosen = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in stats.iter().enumerate() {
        let score = s.score(config.score).expect("n >= 1");
        if score > best {
            best = score;
            chosen = i;
        }
    }
    let reports: Vec<CandidateReport> = candidates
        .into_iter()
        .zip(stats)
        .map(|(play, stats)| CandidateReport {
            static_value: static_value(&play.after),
            play,
            stats,
        })
        .collect();
    Ok(RolloutDecision {
        play: reports[chosen].play.clone(),
        chosen_index: chosen,
        candidates: reports,
    })
}

/// JSON analysis report for a rollout decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub position: Board,
    pub to_move: Player,
    pub roll: DiceRoll,
    pub candidates: Vec<CandidateSummary>,
    pub chosen_index: usize,
    pub config_echo: RolloutConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub play_notation: String,
    pub after_board: Board,
    pub static_value: f64,
    pub n: u64,
    pub wins: u64,
    pub p_hat: Option<f64>,
    pub stderr: Option<f64>,
    pub equity: Option<f64>,
    pub gammon_wins: u64,
    pub gammon_losses: u64,
    pub backgammon_wins: u64,
    pub backgammon_losses: u64,
}

impl AnalysisReport {
    pub fn new(
        board: &Board,
        player: Player,
        roll: DiceRoll,
        config: &RolloutConfig,
        decision: &RolloutDecision,
    ) -> AnalysisReport {
        AnalysisReport {
            position: *board,
            to_move: player,
            roll,
            candidates: decision
                .candidates
                .iter()
                .map(|c| CandidateSummary {
                    play_notation: c.play.notation(player),
                    after_board: c.play.after,
                    static_value: c.static_value,
                    n: c.stats.n,
                    wins: c.stats.wins,
                    p_hat: c.stats.p_hat(),
                    stderr: c.stats.stderr(),
                    equity: c.stats.equity(),
                    gammon_wins: c.stats.gammon_wins,
                    gammon_losses: c.stats.gammon_losses,
                    backgammon_wins: c.stats.backgammon_wins,
                    backgammon_losses: c.stats.backgammon_losses,
                })
                .collect(),
            chosen_index: decision.chosen_index,
            config_echo: config.clone(),
        }
    }
}

/// Decide and summarise in one step.
pub fn analyze(
    model: &ValueModel,
    board: &Board,
    player: Player,
    roll: DiceRoll,
    config: &RolloutConfig,
) -> Result<AnalysisReport, RolloutError> {
    let decision = rollout_decide(model, board, player, roll, config)?;
    Ok(AnalysisReport::new(board, player, roll, config, &decision))
}
