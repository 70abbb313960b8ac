//! Games and matches between strategies, with win statistics.
//!
//! Matches are played in seat-swapped pairs: games `2k` and `2k + 1` share
//! one game seed, hence one dice sequence, with the players' colours
//! exchanged. Over an even number of games each player moves first in
//! exactly half of them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{opening_roll, roll_dice, Board, DiceRoll, GameResult, Player, SAFETY_CAP};
use crate::pool::map_indexed;
use crate::rng::{stream_rng, stream_seed};
use crate::strategy::{Strategy, StrategyError, TurnContext};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("game exceeded {SAFETY_CAP} plies")]
    SafetyCap,
    #[error("a match needs at least one game")]
    NoGames,
    #[error("{player} strategy failed: {source}")]
    Strategy {
        player: Player,
        #[source]
        source: StrategyError,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub player: Player,
    pub roll: DiceRoll,
    pub play: String,
    pub after: Board,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub seed: u64,
    pub first_mover: Player,
    pub result: GameResult,
    pub turns: Vec<Turn>,
}

impl GameRecord {
    /// One line per turn in play notation, then the result.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.turns.iter().enumerate() {
            out.push_str(&format!("{:>3} {:<5} {} {}\n", i + 1, t.player, t.roll, t.play));
        }
        out.push_str(&format!(
            "result: {} wins ({:?})\n",
            self.result.winner, self.result.kind
        ));
        out
    }
}

/// Plays one game from the starting position, `white` against `red`.
///
/// Dice come from the stream keyed by (seed, 0); each seat's strategy gets
/// its own private stream so dice never depend on the players' choices.
pub fn play_game(
    white: &dyn Strategy,
    red: &dyn Strategy,
    seed: u64,
) -> Result<GameRecord, ArenaError> {
    let mut dice = stream_rng(&[seed, 0]);
    let mut seat_rngs = [stream_rng(&[seed, 1, 0]), stream_rng(&[seed, 1, 1])];
    let mut board = Board::initial();
    let (first_mover, mut roll) = opening_roll(&mut dice);
    let mut to_move = first_mover;
    let mut turns = Vec::with_capacity(128);
    for ply in 0..SAFETY_CAP {
        if ply > 0 {
            roll = roll_dice(&mut dice);
        }
        let strategy = match to_move {
            Player::White => white,
            Player::Red => red,
        };
        let mut ctx = TurnContext {
            game_seed: seed,
            ply,
            rng: &mut seat_rngs[to_move as usize],
        };
        let play = strategy
            .choose(&board, to_move, roll, &mut ctx)
            .map_err(|source| ArenaError::Strategy {
                player: to_move,
                source,
            })?;
        board = play.after;
        turns.push(Turn {
            player: to_move,
            roll,
            play: play.notation(to_move),
            after: board,
        });
        if let Some(result) = board.terminal() {
            return Ok(GameRecord {
                seed,
                first_mover,
                result,
                turns,
            });
        }
        to_move = to_move.opponent();
    }
    Err(ArenaError::SafetyCap)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub games: usize,
    pub seed: u64,
    pub workers: usize,
    pub keep_transcripts: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            games: 200,
            seed: 0,
            workers: 1,
            keep_transcripts: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub player_a: String,
    pub player_b: String,
    pub seed: u64,
    pub games: usize,
    pub wins_a: usize,
    pub win_fraction_a: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Average points per game for A on the 1/2/3 scale.
    pub equity_a: f64,
    pub a_moved_first: usize,
    pub gammons_a: usize,
    pub backgammons_a: usize,
    pub gammons_b: usize,
    pub backgammons_b: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transcripts: Option<Vec<String>>,
}

impl MatchReport {
    /// Normal-approximation summary of `wins` out of `games`.
    pub fn interval(wins: usize, games: usize) -> (f64, f64, f64, f64) {
        let p = wins as f64 / games as f64;
        let se = (p * (1.0 - p) / games as f64).sqrt();
        let low = (p - 1.96 * se).clamp(0.0, 1.0);
        let high = (p + 1.96 * se).clamp(0.0, 1.0);
        (p, se, low, high)
    }

    pub fn to_table(&self) -> String {
        let rows = [
            ("player A", self.player_a.clone()),
            ("player B", self.player_b.clone()),
            ("games", self.games.to_string()),
            ("A wins", self.wins_a.to_string()),
            ("A win fraction", format!("{:.4}", self.win_fraction_a)),
            ("stderr", format!("{:.4}", self.stderr)),
            (
                "95% CI",
                format!("[{:.4}, {:.4}]", self.ci95_low, self.ci95_high),
            ),
            ("A equity/game", format!("{:+.4}", self.equity_a)),
            ("A moved first", self.a_moved_first.to_string()),
            (
                "gammons A/B",
                format!("{}/{}", self.gammons_a, self.gammons_b),
            ),
            (
                "backgammons A/B",
                format!("{}/{}", self.backgammons_a, self.backgammons_b),
            ),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<16} {v}\n"));
        }
        out
    }
}

/// Plays `config.games` games between `a` and `b` and aggregates A's results.
pub fn run_match(
    a: &dyn Strategy,
    b: &dyn Strategy,
    config: &MatchConfig,
) -> Result<MatchReport, ArenaError> {
    if config.games == 0 {
        return Err(ArenaError::NoGames);
    }
    let records = map_indexed(config.workers.max(1), config.games, |i| {
        let game_seed = stream_seed(&[config.seed, (i / 2) as u64]);
        let a_color = if i % 2 == 0 { Player::White } else { Player::Red };
        let record = if a_color == Player::White {
            play_game(a, b, game_seed)
        } else {
            play_game(b, a, game_seed)
        };
        record.map(|r| (a_color, r))
    });

    let mut wins_a = 0;
    let mut points_a = 0i64;
    let mut a_moved_first = 0;
    let (mut gammons_a, mut backgammons_a, mut gammons_b, mut backgammons_b) = (0, 0, 0, 0);
    let mut transcripts = config.keep_transcripts.then(Vec::new);
    for record in records {
        let (a_color, record) = record?;
        let result = record.result;
        let a_won = result.winner == a_color;
        wins_a += a_won as usize;
        points_a += result.points_for(a_color) as i64;
        a_moved_first += (record.first_mover == a_color) as usize;
        use crate::game::WinKind::*;
        match (result.kind, a_won) {
            (Gammon, true) => gammons_a += 1,
            (Gammon, false) => gammons_b += 1,
            (Backgammon, true) => backgammons_a += 1,
            (Backgammon, false) => backgammons_b += 1,
            (Single, _) => {}
        }
        if let Some(t) = transcripts.as_mut() {
            t.push(format!("# A plays {a_color}\n{}", record.transcript()));
        }
    }
    let (p, se, low, high) = MatchReport::interval(wins_a, config.games);
    Ok(MatchReport {
        player_a: a.name(),
        player_b: b.name(),
        seed: config.seed,
        games: config.games,
        wins_a,
        win_fraction_a: p,
        stderr: se,
        ci95_low: low,
        ci95_high: high,
        equity_a: points_a as f64 / config.games as f64,
        a_moved_first,
        gammons_a,
        backgammons_a,
        gammons_b,
        backgammons_b,
        transcripts,
    })
}
