//! Backgammon rules: positions, dice, legal plays and game results.
//!
//! Everything here is a pure function over `Copy` values except
//! [`roll_dice`], which advances the caller's random stream.

mod board;
mod dice;
mod moves;

pub use board::{Board, BoardBuilder, BoardError, GameResult, Player, WinKind, CHECKERS};
pub use dice::{opening_roll, roll_dice, DiceError, DiceRoll};
pub use moves::{
    apply_play, legal_plays, parse_notation, resolve_play, CheckerMove, Destination,
    IllegalReason, MoveSpec, Origin, Play, PlayError,
};

pub(crate) use moves::{legal_plays_unchecked, MoveGen};

/// Plies after which a game is declared runaway. Never reached by legal play.
pub const SAFETY_CAP: u32 = 10_000;

pub fn initial_board() -> Board {
    Board::initial()
}

pub fn is_terminal(board: &Board) -> Option<GameResult> {
    board.terminal()
}

pub fn pip_count(board: &Board, player: Player) -> u32 {
    board.pip_count(player)
}
