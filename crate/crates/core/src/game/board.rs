use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHECKERS: u8 = 15;
pub const NUM_POINTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    White,
    Red,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::White, Player::Red];

    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::White => Player::Red,
            Player::Red => Player::White,
        }
    }

    #[inline]
    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Sign used for this player's checkers in the signed point array.
    #[inline]
    pub(crate) fn sign(self) -> i8 {
        match self {
            Player::White => 1,
            Player::Red => -1,
        }
    }

    /// Absolute (White-numbered) point of this player's own `rel` point.
    #[inline]
    pub fn absolute_point(self, rel: u8) -> u8 {
        match self {
            Player::White => rel,
            Player::Red => 25 - rel,
        }
    }

    /// Inverse of [`Player::absolute_point`]; the mapping is an involution.
    #[inline]
    pub fn relative_point(self, abs: u8) -> u8 {
        self.absolute_point(abs)
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::White => "white",
            Player::Red => "red",
        })
    }
}

impl FromStr for Player {
    type Err = BoardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" | "w" => Ok(Player::White),
            "red" | "r" => Ok(Player::Red),
            other => Err(BoardError::Parse(format!("unknown player `{other}`"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoardError {
    #[error("{player} has {total} checkers, expected 15")]
    Conservation { player: Player, total: i32 },
    #[error("point {point} holds {count} checkers")]
    Overfull { point: u8, count: i32 },
    #[error("malformed board text: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WinKind {
    Single,
    Gammon,
    Backgammon,
}

impl WinKind {
    /// Points under the 1/2/3 scale.
    pub fn points(self) -> i32 {
        match self {
            WinKind::Single => 1,
            WinKind::Gammon => 2,
            WinKind::Backgammon => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameResult {
    pub winner: Player,
    pub kind: WinKind,
}

impl GameResult {
    /// Signed points from `player`'s point of view.
    pub fn points_for(&self, player: Player) -> i32 {
        if self.winner == player {
            self.kind.points()
        } else {
            -self.kind.points()
        }
    }
}

/// A complete backgammon position.
///
/// Points are stored in White's numbering (1..=24, White moves towards 1).
/// Positive counts belong to White, negative counts to Red. The derived
/// ordering is the canonical total order used to sort plays.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Board {
    pub(crate) points: [i8; NUM_POINTS],
    pub(crate) bar: [u8; 2],
    pub(crate) off: [u8; 2],
}

impl Board {
    pub fn initial() -> Board {
        let mut board = Board::empty();
        for player in Player::BOTH {
            for (rel, count) in [(24u8, 2u8), (13, 5), (8, 3), (6, 5)] {
                board.set(player, rel, count);
            }
        }
        board
    }

    /// Board with no checkers on the points, bars or trays. Not valid on
    /// its own; callers fill it through [`Board::builder`].
    fn empty() -> Board {
        Board {
            points: [0; NUM_POINTS],
            bar: [0; 2],
            off: [0; 2],
        }
    }

    /// Starts an empty board; checkers that are never placed count as
    /// borne off when the builder finishes.
    pub fn builder() -> BoardBuilder {
        BoardBuilder {
            board: Board::empty(),
        }
    }

    /// Signed checker count on an absolute point (positive = White).
    #[inline]
    pub fn signed_count(&self, abs: u8) -> i8 {
        self.points[abs as usize - 1]
    }

    /// Owner and count of an absolute point.
    pub fn point(&self, abs: u8) -> Option<(Player, u8)> {
        let c = self.signed_count(abs);
        match c.signum() {
            1 => Some((Player::White, c as u8)),
            -1 => Some((Player::Red, c.unsigned_abs())),
            _ => None,
        }
    }

    /// Checkers `player` has on its own `rel` point (0 if empty or held by the opponent).
    #[inline]
    pub fn own_count(&self, player: Player, rel: u8) -> u8 {
        let v = self.relative(player, rel);
        if v > 0 {
            v as u8
        } else {
            0
        }
    }

    /// Count on `player`'s `rel` point, positive for `player`'s checkers.
    #[inline]
    pub(crate) fn relative(&self, player: Player, rel: u8) -> i8 {
        self.points[rel_index(player, rel)] * player.sign()
    }

    #[inline]
    pub fn bar(&self, player: Player) -> u8 {
        self.bar[player.index()]
    }

    #[inline]
    pub fn off(&self, player: Player) -> u8 {
        self.off[player.index()]
    }

    fn set(&mut self, player: Player, rel: u8, count: u8) {
        self.points[rel_index(player, rel)] = count as i8 * player.sign();
    }

    pub fn validate(&self) -> Result<(), BoardError> {
        for (i, &c) in self.points.iter().enumerate() {
            if c.unsigned_abs() > CHECKERS {
                return Err(BoardError::Overfull {
                    point: i as u8 + 1,
                    count: c as i32,
                });
            }
        }
        for player in Player::BOTH {
            let on_points: i32 = (1..=24).map(|r| self.own_count(player, r) as i32).sum();
            let total = on_points + self.bar(player) as i32 + self.off(player) as i32;
            if total != CHECKERS as i32 {
                return Err(BoardError::Conservation { player, total });
            }
        }
        Ok(())
    }

    pub fn pip_count(&self, player: Player) -> u32 {
        let on_points: u32 = (1..=24u8)
            .map(|r| r as u32 * self.own_count(player, r) as u32)
            .sum();
        on_points + 25 * self.bar(player) as u32
    }

    /// True when every checker `player` has left is in its home board.
    #[inline]
    pub(crate) fn all_home(&self, player: Player) -> bool {
        self.bar(player) == 0 && (7..=24).all(|r| self.relative(player, r) <= 0)
    }

    pub fn terminal(&self) -> Option<GameResult> {
        let winner = Player::BOTH
            .into_iter()
            .find(|&p| self.off(p) == CHECKERS)?;
        let loser = winner.opponent();
        let kind = if self.off(loser) > 0 {
            WinKind::Single
        } else {
            // winner's home board is the loser's 19..=24
            let trapped = self.bar(loser) > 0 || (19..=24).any(|r| self.own_count(loser, r) > 0);
            if trapped {
                WinKind::Backgammon
            } else {
                WinKind::Gammon
            }
        };
        Some(GameResult { winner, kind })
    }

    /// Colour-swapped board reflected through k -> 25 - k.
    pub fn mirror(&self) -> Board {
        let mut points = [0i8; NUM_POINTS];
        for (i, p) in points.iter_mut().enumerate() {
            *p = -self.points[NUM_POINTS - 1 - i];
        }
        Board {
            points,
            bar: [self.bar[1], self.bar[0]],
            off: [self.off[1], self.off[0]],
        }
    }

    /// Text form: 24 signed point counts in White's numbering, then White bar, Red bar.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(80);
        for (i, c) in self.points.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&c.to_string());
        }
        out.push_str(&format!(" {} {}", self.bar[0], self.bar[1]));
        out
    }

    pub fn from_text(text: &str) -> Result<Board, BoardError> {
        let values = text
            .split_whitespace()
            .map(|t| {
                t.parse::<i32>()
                    .map_err(|_| BoardError::Parse(format!("`{t}` is not an integer")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != 26 {
            return Err(BoardError::Parse(format!(
                "expected 26 integers, found {}",
                values.len()
            )));
        }
        let mut board = Board::empty();
        for (i, &v) in values[..24].iter().enumerate() {
            if v.abs() > CHECKERS as i32 {
                return Err(BoardError::Overfull {
                    point: i as u8 + 1,
                    count: v,
                });
            }
            board.points[i] = v as i8;
        }
        for (slot, &v) in values[24..].iter().enumerate() {
            if !(0..=CHECKERS as i32).contains(&v) {
                return Err(BoardError::Parse(format!("bar count {v} out of range")));
            }
            board.bar[slot] = v as u8;
        }
        for player in Player::BOTH {
            let used: i32 = (1..=24).map(|r| board.own_count(player, r) as i32).sum::<i32>()
                + board.bar(player) as i32;
            if used > CHECKERS as i32 {
                return Err(BoardError::Conservation {
                    player,
                    total: used,
                });
            }
            board.off[player.index()] = CHECKERS - used as u8;
        }
        board.validate()?;
        Ok(board)
    }

    /// Stable 64-bit fingerprint (FNV-1a over the packed position).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let bytes = self
            .points
            .iter()
            .map(|&c| c as u8)
            .chain(self.bar)
            .chain(self.off);
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[inline]
pub(crate) fn rel_index(player: Player, rel: u8) -> usize {
    match player {
        Player::White => rel as usize - 1,
        Player::Red => 24 - rel as usize,
    }
}

impl Default for Board {
    fn default() -> Self {
        Board::initial()
    }
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Board({} | off {} {})", self.to_text(), self.off[0], self.off[1])
    }
}

impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Board {
    type Err = BoardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Board::from_text(s)
    }
}

impl Serialize for Board {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Board {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Board::from_text(&text).map_err(serde::de::Error::custom)
    }
}

/// Places checkers by each player's own numbering.
pub struct BoardBuilder {
    board: Board,
}

impl BoardBuilder {
    pub fn checkers(mut self, player: Player, rel: u8, count: u8) -> Self {
        assert!((1..=24).contains(&rel), "point {rel} out of range");
        self.board.set(player, rel, count);
        self
    }

    pub fn bar(mut self, player: Player, count: u8) -> Self {
        self.board.bar[player.index()] = count;
        self
    }

    pub fn build(mut self) -> Result<Board, BoardError> {
        for player in Player::BOTH {
            let used: i32 = (1..=24)
                .map(|r| self.board.own_count(player, r) as i32)
                .sum::<i32>()
                + self.board.bar(player) as i32;
            if used > CHECKERS as i32 {
                return Err(BoardError::Conservation {
                    player,
                    total: used,
                });
            }
            self.board.off[player.index()] = CHECKERS - used as u8;
        }
        self.board.validate()?;
        Ok(self.board)
    }
}
