use std::fmt;

use thiserror::Error;

use super::board::{rel_index, Board, BoardError, Player};
use super::dice::DiceRoll;

/// Relative index used for the bar in generator loops.
const BAR_REL: u8 = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Bar,
    /// Absolute point, White's numbering.
    Point(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Destination {
    /// Absolute point, White's numbering.
    Point(u8),
    Off,
}

/// One checker moved by one die. Points are absolute (White's numbering),
/// so White travels towards 1 and Red towards 24.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CheckerMove {
    pub from: Origin,
    pub to: Destination,
    pub pips: u8,
}

impl CheckerMove {
    /// Origin in `player`'s own numbering (25 for the bar).
    pub fn from_relative(&self, player: Player) -> u8 {
        match self.from {
            Origin::Bar => BAR_REL,
            Origin::Point(p) => player.relative_point(p),
        }
    }

    /// Destination in `player`'s own numbering (0 for off).
    pub fn to_relative(&self, player: Player) -> u8 {
        match self.to {
            Destination::Off => 0,
            Destination::Point(p) => player.relative_point(p),
        }
    }

    /// Standard notation in the mover's own numbering, e.g. `13/7`, `bar/20`, `6/off`.
    pub fn notation(&self, player: Player) -> String {
        let from = match self.from {
            Origin::Bar => "bar".to_string(),
            Origin::Point(_) => self.from_relative(player).to_string(),
        };
        let to = match self.to {
            Destination::Off => "off".to_string(),
            Destination::Point(_) => self.to_relative(player).to_string(),
        };
        format!("{from}/{to}")
    }
}

/// One turn: the checker moves in order and the resulting position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Play {
    pub moves: Vec<CheckerMove>,
    pub after: Board,
}

impl Play {
    pub fn pass(board: Board) -> Play {
        Play {
            moves: Vec::new(),
            after: board,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn notation(&self, player: Player) -> String {
        if self.moves.is_empty() {
            return "pass".to_string();
        }
        self.moves
            .iter()
            .map(|m| m.notation(player))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum IllegalReason {
    #[error("no checker of the mover on the origin point")]
    NoChecker,
    #[error("checkers on the bar must enter first")]
    MustEnterFromBar,
    #[error("destination is held by two or more opposing checkers")]
    Blocked,
    #[error("bearing off requires all checkers in the home board")]
    NotAllHome,
    #[error("over-shooting bear-off requires no checker on a higher point")]
    HigherCheckerPresent,
    #[error("move distance does not match the die")]
    WrongDistance,
    #[error("no remaining die matches the move")]
    NoMatchingDie,
    #[error("origin or destination out of range")]
    OutOfRange,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlayError {
    #[error("illegal move #{index} `{notation}`: {reason}")]
    IllegalMove {
        index: usize,
        notation: String,
        reason: IllegalReason,
    },
    #[error("moves do not produce the play's resulting position")]
    AfterMismatch,
    #[error("not a legal play for this roll: dice must be used to the maximum (both dice, or the larger die)")]
    NotMaximal,
    #[error("cannot parse play `{0}`")]
    Parse(String),
    #[error("game is already over")]
    Terminal,
    #[error(transparent)]
    Board(#[from] BoardError),
}

/// Moves one checker of `player` from its relative point `src` (25 = bar) by `die`.
#[inline]
pub(crate) fn try_move(
    board: &Board,
    player: Player,
    src: u8,
    die: u8,
) -> Result<(Board, CheckerMove), IllegalReason> {
    let me = player.index();
    let sign = player.sign();
    if src == BAR_REL {
        if board.bar[me] == 0 {
            return Err(IllegalReason::NoChecker);
        }
    } else {
        if !(1..=24).contains(&src) {
            return Err(IllegalReason::OutOfRange);
        }
        if board.bar[me] > 0 {
            return Err(IllegalReason::MustEnterFromBar);
        }
        if board.relative(player, src) <= 0 {
            return Err(IllegalReason::NoChecker);
        }
    }
    let target = src as i8 - die as i8;
    let mut next = *board;
    let from = if src == BAR_REL {
        next.bar[me] -= 1;
        Origin::Bar
    } else {
        next.points[rel_index(player, src)] -= sign;
        Origin::Point(player.absolute_point(src))
    };
    let to = if target >= 1 {
        let idx = rel_index(player, target as u8);
        let there = next.points[idx] * sign;
        if there < -1 {
            return Err(IllegalReason::Blocked);
        }
        if there == -1 {
            next.points[idx] = sign;
            next.bar[player.opponent().index()] += 1;
        } else {
            next.points[idx] += sign;
        }
        Destination::Point(player.absolute_point(target as u8))
    } else {
        if !board.all_home(player) {
            return Err(IllegalReason::NotAllHome);
        }
        if target < 0 && (src + 1..=6).any(|r| board.relative(player, r) > 0) {
            return Err(IllegalReason::HigherCheckerPresent);
        }
        next.off[me] += 1;
        Destination::Off
    };
    Ok((
        next,
        CheckerMove {
            from,
            to,
            pips: die,
        },
    ))
}

/// Up to four checker moves, kept inline so leaves copy cheaply.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MoveList {
    moves: [CheckerMove; 4],
    len: u8,
}

impl MoveList {
    const EMPTY: MoveList = MoveList {
        moves: [CheckerMove {
            from: Origin::Bar,
            to: Destination::Off,
            pips: 0,
        }; 4],
        len: 0,
    };

    fn push(&mut self, mv: CheckerMove) {
        self.moves[self.len as usize] = mv;
        self.len += 1;
    }

    fn pop(&mut self) {
        self.len -= 1;
    }
}

impl std::ops::Deref for MoveList {
    type Target = [CheckerMove];

    fn deref(&self) -> &[CheckerMove] {
        &self.moves[..self.len as usize]
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Leaf {
    pub after: Board,
    pub moves: MoveList,
}

/// Reusable move generator. Yields every maximal move sequence (not
/// deduplicated); `legal_plays` sorts and deduplicates the result.
#[derive(Default)]
pub(crate) struct MoveGen {
    leaves: Vec<Leaf>,
    dice: [u8; 4],
    n_dice: usize,
    doubles: bool,
    best_len: usize,
}

impl MoveGen {
    pub fn new() -> MoveGen {
        MoveGen {
            leaves: Vec::with_capacity(64),
            ..Default::default()
        }
    }

    pub fn generate(&mut self, board: &Board, player: Player, roll: DiceRoll) -> &[Leaf] {
        self.leaves.clear();
        self.best_len = 0;
        let mut moves = MoveList::EMPTY;
        if roll.is_double() {
            self.doubles = true;
            self.dice = [roll.first(); 4];
            self.n_dice = 4;
            self.search(board, player, 0, BAR_REL, &mut moves);
        } else {
            self.doubles = false;
            self.n_dice = 2;
            self.dice = [roll.first(), roll.second(), 0, 0];
            self.search(board, player, 0, BAR_REL, &mut moves);
            self.dice = [roll.second(), roll.first(), 0, 0];
            self.search(board, player, 0, BAR_REL, &mut moves);
            if self.best_len == 1 {
                let high = roll.high();
                if self.leaves.iter().any(|l| l.moves[0].pips == high) {
                    self.leaves.retain(|l| l.moves[0].pips == high);
                }
            }
        }
        if self.leaves.is_empty() {
            self.leaves.push(Leaf {
                after: *board,
                moves: MoveList::EMPTY,
            });
        }
        &self.leaves
    }

    fn search(
        &mut self,
        board: &Board,
        player: Player,
        depth: usize,
        max_src: u8,
        moves: &mut MoveList,
    ) {
        let mut moved = false;
        if depth < self.n_dice {
            let die = self.dice[depth];
            if board.bar(player) > 0 {
                if max_src >= BAR_REL {
                    if let Ok((next, mv)) = try_move(board, player, BAR_REL, die) {
                        moved = true;
                        moves.push(mv);
                        self.search(&next, player, depth + 1, BAR_REL, moves);
                        moves.pop();
                    }
                }
            } else {
                let top = max_src.min(24);
                for src in (1..=top).rev() {
                    if board.relative(player, src) <= 0 {
                        continue;
                    }
                    if let Ok((next, mv)) = try_move(board, player, src, die) {
                        moved = true;
                        moves.push(mv);
                        // doubles: visit origins in non-increasing order to skip permutations
                        let bound = if self.doubles { src } else { BAR_REL };
                        self.search(&next, player, depth + 1, bound, moves);
                        moves.pop();
                    }
                }
            }
        }
        if !moved && depth > 0 {
            if depth > self.best_len {
                self.best_len = depth;
                self.leaves.clear();
            }
            if depth == self.best_len {
                self.leaves.push(Leaf {
                    after: *board,
                    moves: *moves,
                });
            }
        }
    }
}

/// All legal plays, deduplicated by resulting position and sorted by it.
pub fn legal_plays(board: &Board, player: Player, roll: DiceRoll) -> Result<Vec<Play>, PlayError> {
    board.validate()?;
    if board.terminal().is_some() {
        return Err(PlayError::Terminal);
    }
    Ok(legal_plays_unchecked(board, player, roll))
}

pub(crate) fn legal_plays_unchecked(board: &Board, player: Player, roll: DiceRoll) -> Vec<Play> {
    let mut gen = MoveGen::new();
    let mut leaves = gen.generate(board, player, roll).to_vec();
    leaves.sort_by_key(|l| l.after);
    leaves.dedup_by(|b, a| a.after == b.after);
    leaves
        .into_iter()
        .map(|l| Play {
            moves: l.moves.to_vec(),
            after: l.after,
        })
        .collect()
}

/// Replays `play.moves` one checker at a time and returns the resulting board.
///
/// Every move is checked against the rules; the first illegal one is reported.
/// The roll is not known here, so maximal dice usage is checked by
/// [`resolve_play`] instead.
pub fn apply_play(board: &Board, player: Player, play: &Play) -> Result<Board, PlayError> {
    board.validate()?;
    let mut current = *board;
    for (index, mv) in play.moves.iter().enumerate() {
        let illegal = |reason| PlayError::IllegalMove {
            index,
            notation: mv.notation(player),
            reason,
        };
        if !(1..=6).contains(&mv.pips) {
            return Err(illegal(IllegalReason::WrongDistance));
        }
        let src = mv.from_relative(player);
        let (next, done) = try_move(&current, player, src, mv.pips).map_err(illegal)?;
        if done.to != mv.to {
            return Err(illegal(IllegalReason::WrongDistance));
        }
        current = next;
    }
    if current != play.after {
        return Err(PlayError::AfterMismatch);
    }
    Ok(current)
}

/// A move as written by a human: relative origin (25 = bar) and
/// relative destination (0 = off), in the mover's own numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveSpec {
    pub from: u8,
    pub to: u8,
}

/// Parses play notation such as `24/18 18/13`, `8/5(2)`, `bar/20*`, `6/off` or `pass`.
pub fn parse_notation(text: &str) -> Result<Vec<MoveSpec>, PlayError> {
    let err = || PlayError::Parse(text.to_string());
    let text = text.trim();
    if text.eq_ignore_ascii_case("pass") || text.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        let (body, repeat) = match token.find('(') {
            Some(i) => {
                let n: usize = token[i + 1..]
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| err())?;
                (&token[..i], n)
            }
            None => (token, 1),
        };
        let stops = body
            .split('/')
            .map(|s| {
                let s = s.trim_end_matches('*').to_ascii_lowercase();
                match s.as_str() {
                    "bar" => Ok(25),
                    "off" => Ok(0),
                    n => n.parse::<u8>().ok().filter(|v| (1..=24).contains(v)).ok_or_else(err),
                }
            })
            .collect::<Result<Vec<u8>, _>>()?;
        if stops.len() < 2 || !(1..=4).contains(&repeat) {
            return Err(err());
        }
        for _ in 0..repeat {
            for pair in stops.windows(2) {
                out.push(MoveSpec {
                    from: pair[0],
                    to: pair[1],
                });
            }
        }
    }
    if out.len() > 4 {
        return Err(err());
    }
    Ok(out)
}

/// Turns a human-entered move list into the matching legal play for `roll`.
pub fn resolve_play(
    board: &Board,
    player: Player,
    roll: DiceRoll,
    specs: &[MoveSpec],
) -> Result<Play, PlayError> {
    let legal = legal_plays(board, player, roll)?;
    let mut dice: Vec<u8> = if roll.is_double() {
        vec![roll.first(); 4]
    } else {
        vec![roll.first(), roll.second()]
    };
    let mut current = *board;
    let mut moves = Vec::with_capacity(specs.len());
    for (index, spec) in specs.iter().enumerate() {
        let notation = format!(
            "{}/{}",
            if spec.from == 25 { "bar".to_string() } else { spec.from.to_string() },
            if spec.to == 0 { "off".to_string() } else { spec.to.to_string() }
        );
        let illegal = |reason| PlayError::IllegalMove {
            index,
            notation: notation.clone(),
            reason,
        };
        if spec.from <= spec.to {
            return Err(illegal(IllegalReason::WrongDistance));
        }
        let distance = spec.from - spec.to;
        let die_slot = dice.iter().position(|&d| d == distance).or_else(|| {
            if spec.to == 0 {
                // smallest die that over-shoots
                dice.iter()
                    .enumerate()
                    .filter(|(_, &d)| d > distance)
                    .min_by_key(|(_, &d)| d)
                    .map(|(i, _)| i)
            } else {
                None
            }
        });
        let slot = die_slot.ok_or_else(|| illegal(IllegalReason::NoMatchingDie))?;
        let die = dice.remove(slot);
        let (next, mv) = try_move(&current, player, spec.from, die).map_err(illegal)?;
        current = next;
        moves.push(mv);
    }
    match legal.into_iter().find(|p| p.after == current) {
        Some(p) => Ok(Play {
            moves,
            after: p.after,
        }),
        None => Err(PlayError::NotMaximal),
    }
}

impl fmt::Display for CheckerMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let from = match self.from {
            Origin::Bar => "bar".to_string(),
            Origin::Point(p) => p.to_string(),
        };
        let to = match self.to {
            Destination::Off => "off".to_string(),
            Destination::Point(p) => p.to_string(),
        };
        write!(f, "{from}->{to} ({})", self.pips)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::board::WinKind;

    fn roll(a: u8, b: u8) -> DiceRoll {
        DiceRoll::new(a, b).unwrap()
    }

    #[test]
    fn closed_board_with_checker_on_bar_is_forced_pass() {
        let mut b = Board::builder().bar(Player::White, 1);
        // White enters on 19..24, which is Red's home board 1..6
        for rel in 1..=6 {
            b = b.checkers(Player::Red, rel, 2);
        }
        let board = b.checkers(Player::White, 13, 14).build().unwrap();
        for r in DiceRoll::all_with_weights().map(|(r, _)| r) {
            let plays = legal_plays(&board, Player::White, r).unwrap();
            assert_eq!(plays.len(), 1);
            assert!(plays[0].is_pass());
            assert_eq!(plays[0].after, board);
            assert_eq!(plays[0].notation(Player::White), "pass");
        }
    }

    #[test]
    fn last_checker_bears_off_once() {
        let board = Board::builder()
            .checkers(Player::White, 1, 1)
            .checkers(Player::Red, 6, 15)
            .build()
            .unwrap();
        let plays = legal_plays(&board, Player::White, roll(5, 3)).unwrap();
        assert_eq!(plays.len(), 1);
        assert_eq!(plays[0].moves.len(), 1);
        assert_eq!(plays[0].moves[0].pips, 5);
        assert_eq!(plays[0].after.terminal().unwrap().winner, Player::White);
        assert_eq!(plays[0].after.terminal().unwrap().kind, WinKind::Gammon);
    }

    #[test]
    fn opening_31_makes_the_five_point() {
        let plays = legal_plays(&Board::initial(), Player::White, roll(3, 1)).unwrap();
        assert!(plays.iter().all(|p| p.moves.len() == 2));
        let notations: Vec<_> = plays.iter().map(|p| p.notation(Player::White)).collect();
        assert!(
            notations.iter().any(|n| n == "8/5 6/5" || n == "6/5 8/5"),
            "{notations:?}"
        );
        // sorted and distinct
        assert!(plays.windows(2).all(|w| w[0].after < w[1].after));
    }

    #[test]
    fn red_moves_towards_24() {
        let plays = legal_plays(&Board::initial(), Player::Red, roll(6, 5)).unwrap();
        let run = plays
            .iter()
            .find(|p| p.notation(Player::Red) == "24/18 18/13")
            .expect("lover's leap");
        assert_eq!(run.moves[0].from, Origin::Point(1));
        assert_eq!(run.moves[0].to, Destination::Point(7));
        assert_eq!(run.after.signed_count(12), -6);
    }

    #[test]
    fn hitting_a_blot() {
        let board = Board::builder()
            .checkers(Player::White, 8, 15)
            .checkers(Player::Red, 20, 1) // White's 5-point
            .checkers(Player::Red, 1, 14)
            .build()
            .unwrap();
        let play = legal_plays(&board, Player::White, roll(3, 1))
            .unwrap()
            .into_iter()
            .find(|p| p.notation(Player::White) == "8/5 5/4")
            .unwrap_or_else(|| {
                legal_plays(&board, Player::White, roll(3, 1))
                    .unwrap()
                    .into_iter()
                    .find(|p| p.after.own_count(Player::White, 5) == 1 && p.after.bar(Player::Red) == 1)
                    .unwrap()
            });
        let after = apply_play(&board, Player::White, &play).unwrap();
        assert_eq!(after.bar(Player::Red), 1);
        assert!(after.validate().is_ok());

        let direct = Play {
            moves: vec![CheckerMove {
                from: Origin::Point(8),
                to: Destination::Point(5),
                pips: 3,
            }],
            after: {
                let (b, _) = try_move(&board, Player::White, 8, 3).unwrap();
                b
            },
        };
        let after = apply_play(&board, Player::White, &direct).unwrap();
        assert_eq!(after.bar(Player::Red), board.bar(Player::Red) + 1);
        assert_eq!(after.point(5), Some((Player::White, 1)));
    }

    #[test]
    fn larger_die_rule() {
        // 13/7 and 13/8 each play, but no second die can follow either.
        let board = Board::builder()
            .checkers(Player::White, 13, 1)
            .checkers(Player::White, 1, 14)
            .checkers(Player::Red, 23, 2) // White's 2-point
            .checkers(Player::Red, 1, 13)
            .build()
            .unwrap();
        let plays = legal_plays(&board, Player::White, roll(6, 5)).unwrap();
        assert_eq!(plays.len(), 1);
        assert_eq!(plays[0].notation(Player::White), "13/7");
        assert_eq!(apply_play(&board, Player::White, &plays[0]).unwrap(), plays[0].after);
    }

    #[test]
    fn apply_rejects_illegal_move() {
        let board = Board::initial();
        let bogus = Play {
            moves: vec![CheckerMove {
                from: Origin::Point(6),
                to: Destination::Point(1),
                pips: 5,
            }],
            after: board,
        };
        match apply_play(&board, Player::White, &bogus) {
            Err(PlayError::IllegalMove { index, reason, .. }) => {
                assert_eq!(index, 0);
                assert_eq!(reason, IllegalReason::Blocked);
            }
            other => panic!("{other:?}"),
        }
        let pass = Play::pass(board);
        assert_eq!(apply_play(&board, Player::White, &pass).unwrap(), board);
    }

    #[test]
    fn notation_parsing() {
        assert_eq!(parse_notation("pass").unwrap(), vec![]);
        assert_eq!(
            parse_notation("24/18 18/13").unwrap(),
            vec![MoveSpec { from: 24, to: 18 }, MoveSpec { from: 18, to: 13 }]
        );
        assert_eq!(parse_notation("8/5(2)").unwrap().len(), 2);
        assert_eq!(parse_notation("24/18/13").unwrap().len(), 2);
        assert_eq!(
            parse_notation("bar/20* 6/off").unwrap(),
            vec![MoveSpec { from: 25, to: 20 }, MoveSpec { from: 6, to: 0 }]
        );
        assert!(parse_notation("24-18").is_err());
        assert!(parse_notation("8/5(5)").is_err());
    }

    #[test]
    fn resolve_human_play() {
        let board = Board::initial();
        let r = roll(3, 1);
        let specs = parse_notation("8/5 6/5").unwrap();
        let play = resolve_play(&board, Player::White, r, &specs).unwrap();
        assert_eq!(play.after.own_count(Player::White, 5), 2);

        // only one die used though both can be
        let half = parse_notation("8/5").unwrap();
        assert_eq!(
            resolve_play(&board, Player::White, r, &half),
            Err(PlayError::NotMaximal)
        );
        // onto a made point
        let blocked = parse_notation("13/7 7/6").unwrap();
        assert!(resolve_play(&board, Player::White, roll(6, 1), &blocked).is_ok());
        let bad = parse_notation("6/1 6/5").unwrap();
        match resolve_play(&board, Player::White, roll(5, 1), &bad) {
            Err(PlayError::IllegalMove { index: 0, reason, .. }) => {
                assert_eq!(reason, IllegalReason::Blocked)
            }
            other => panic!("{other:?}"),
        }
    }
}
