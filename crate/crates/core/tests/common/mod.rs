//! Test-only oracles, written independently of the engine's move generator.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use gammon_core::game::{Board, DiceRoll, GameResult, Player, WinKind};
use gammon_core::rng::stream_rng;
use gammon_core::training::{Step, Trajectory};
use gammon_core::valuation::{encode, logistic, ValueModel, DIMENSION};
use gammon_core::rng::StreamRng;
use rand::Rng;

/// Mover-relative position: `pts[r]` for r in 1..=24 (positive = mover),
/// `pts[25]` = mover's bar, plus opponent bar and both trays.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
struct Rel {
    pts: [i32; 26],
    opp_bar: i32,
    my_off: i32,
    opp_off: i32,
}

fn to_rel(board: &Board, player: Player) -> Rel {
    let mut pts = [0i32; 26];
    for r in 1..=24u8 {
        pts[r as usize] = match board.point(player.absolute_point(r)) {
            Some((owner, n)) if owner == player => n as i32,
            Some((_, n)) => -(n as i32),
            None => 0,
        };
    }
    pts[25] = board.bar(player) as i32;
    Rel {
        pts,
        opp_bar: board.bar(player.opponent()) as i32,
        my_off: board.off(player) as i32,
        opp_off: board.off(player.opponent()) as i32,
    }
}

fn from_rel(rel: &Rel, player: Player) -> Board {
    let opp = player.opponent();
    let mut b = Board::builder().bar(player, rel.pts[25] as u8).bar(opp, rel.opp_bar as u8);
    for r in 1..=24u8 {
        let v = rel.pts[r as usize];
        if v > 0 {
            b = b.checkers(player, r, v as u8);
        } else if v < 0 {
            // opponent's own numbering of my point r is 25 - r
            b = b.checkers(opp, 25 - r, (-v) as u8);
        }
    }
    let board = b.build().expect("oracle produced an invalid board");
    assert_eq!(board.off(player) as i32, rel.my_off);
    board
}

/// One checker from `s` (25 = bar) by `d`, or None if illegal.
fn step(pos: &Rel, s: usize, d: usize) -> Option<Rel> {
    if pos.pts[25] > 0 && s != 25 {
        return None;
    }
    if pos.pts[s] <= 0 {
        return None;
    }
    let mut next = *pos;
    next.pts[s] -= 1;
    let t = s as i32 - d as i32;
    if t >= 1 {
        let t = t as usize;
        match pos.pts[t] {
            v if v <= -2 => return None,
            -1 => {
                next.pts[t] = 1;
                next.opp_bar += 1;
            }
            _ => next.pts[t] += 1,
        }
        return Some(next);
    }
    let outside: i32 = (7..=25).map(|i| pos.pts[i].max(0)).sum();
    if outside > 0 {
        return None;
    }
    if t < 0 {
        let highest = (1..=6).rev().find(|&i| pos.pts[i] > 0).unwrap();
        if highest != s {
            return None;
        }
    }
    next.my_off += 1;
    Some(next)
}

/// Every sequence of single moves along `dice` in order, exhaustively.
fn sequences(pos: &Rel, dice: &[usize], used: Vec<usize>, out: &mut Vec<(Vec<usize>, Rel)>) {
    let mut any = false;
    if let Some((&d, rest)) = dice.split_first() {
        for s in 1..=25 {
            if let Some(next) = step(pos, s, d) {
                any = true;
                let mut u = used.clone();
                u.push(d);
                sequences(&next, rest, u, out);
            }
        }
    }
    if !any {
        out.push((used, *pos));
    }
}

/// Brute-force legal after-states: all die orders, all origins, maximal
/// dice usage, larger die when only one can be played, deduplicated.
pub fn oracle_after_states(board: &Board, player: Player, roll: DiceRoll) -> BTreeSet<Board> {
    oracle_sequences(board, player, roll)
        .into_iter()
        .map(|(_, b)| b)
        .collect()
}

/// Maximal sequences with the dice they used.
pub fn oracle_sequences(board: &Board, player: Player, roll: DiceRoll) -> Vec<(Vec<usize>, Board)> {
    let pos = to_rel(board, player);
    let (a, b) = (roll.first() as usize, roll.second() as usize);
    let orders: Vec<Vec<usize>> = if a == b {
        vec![vec![a; 4]]
    } else {
        vec![vec![a, b], vec![b, a]]
    };
    let mut all = Vec::new();
    for dice in &orders {
        sequences(&pos, dice, Vec::new(), &mut all);
    }
    let longest = all.iter().map(|(u, _)| u.len()).max().unwrap_or(0);
    let mut kept: Vec<_> = all.into_iter().filter(|(u, _)| u.len() == longest).collect();
    if a != b && longest == 1 {
        let high = a.max(b);
        if kept.iter().any(|(u, _)| u[0] == high) {
            kept.retain(|(u, _)| u[0] == high);
        }
    }
    kept.into_iter()
        .map(|(u, r)| (u, from_rel(&r, player)))
        .collect()
}

/// Random valid, non-terminal board. About a third of the sides are
/// confined to their home board to exercise bearing off.
pub fn random_board(rng: &mut StreamRng) -> Board {
    loop {
        let mut owner = [None::<(Player, u8)>; 25];
        let mut bars = [0u8; 2];
        let mut ok = true;
        for player in Player::BOTH {
            let home_only = rng.random_bool(0.35);
            let off: u8 = if rng.random_bool(0.4) {
                rng.random_range(0..15)
            } else {
                0
            };
            let bar: u8 = if !home_only && rng.random_bool(0.25) {
                rng.random_range(1..=3).min(15 - off)
            } else {
                0
            };
            bars[player as usize] = bar;
            let mut left = 15 - off - bar;
            let mut guard = 0;
            while left > 0 {
                guard += 1;
                if guard > 500 {
                    ok = false;
                    break;
                }
                let rel: u8 = if home_only {
                    rng.random_range(1..=6)
                } else {
                    rng.random_range(1..=24)
                };
                let abs = player.absolute_point(rel) as usize;
                match owner[abs] {
                    Some((p, n)) if p == player => {
                        owner[abs] = Some((p, n + 1));
                        left -= 1;
                    }
                    None => {
                        owner[abs] = Some((player, 1));
                        left -= 1;
                    }
                    _ => {}
                }
            }
        }
        if !ok {
            continue;
        }
        let mut b = Board::builder();
        for (abs, cell) in owner.iter().enumerate().skip(1) {
            if let Some((p, n)) = cell {
                b = b.checkers(*p, p.relative_point(abs as u8), *n);
            }
        }
        for p in Player::BOTH {
            b = b.bar(p, bars[p as usize]);
        }
        let board = b.build().expect("generator keeps conservation");
        if board.terminal().is_none() {
            return board;
        }
    }
}

pub fn random_roll(rng: &mut StreamRng) -> DiceRoll {
    DiceRoll::new(rng.random_range(1..=6), rng.random_range(1..=6)).unwrap()
}

/// Exact win probabilities for pure bear-off races (both sides entirely in
/// their home boards), by expectimax over all dice.
pub struct RaceSolver {
    memo: HashMap<([u8; 6], [u8; 6]), f64>,
}

impl RaceSolver {
    pub fn new() -> RaceSolver {
        RaceSolver {
            memo: HashMap::new(),
        }
    }

    fn board(mover: Player, mine: &[u8; 6], theirs: &[u8; 6]) -> Board {
        let mut b = Board::builder();
        for i in 0..6 {
            if mine[i] > 0 {
                b = b.checkers(mover, i as u8 + 1, mine[i]);
            }
            if theirs[i] > 0 {
                b = b.checkers(mover.opponent(), i as u8 + 1, theirs[i]);
            }
        }
        b.build().unwrap()
    }

    fn home(board: &Board, p: Player) -> [u8; 6] {
        let mut h = [0u8; 6];
        for (i, slot) in h.iter_mut().enumerate() {
            *slot = board.own_count(p, i as u8 + 1);
        }
        h
    }

    /// Probability that the side to roll (holding `mine`) wins.
    pub fn win_prob(&mut self, mine: [u8; 6], theirs: [u8; 6]) -> f64 {
        if let Some(&v) = self.memo.get(&(mine, theirs)) {
            return v;
        }
        let board = RaceSolver::board(Player::White, &mine, &theirs);
        let mut total = 0.0;
        for a in 1..=6u8 {
            for b in 1..=6u8 {
                let roll = DiceRoll::new(a, b).unwrap();
                let best = oracle_after_states(&board, Player::White, roll)
                    .into_iter()
                    .map(|after| self.after_value(&after, Player::White))
                    .fold(f64::NEG_INFINITY, f64::max);
                total += best / 36.0;
            }
        }
        self.memo.insert((mine, theirs), total);
        total
    }

    /// Exact winning chance of `mover` once it has produced `after`.
    pub fn after_value(&mut self, after: &Board, mover: Player) -> f64 {
        if after.terminal().is_some() {
            return 1.0;
        }
        let mine = RaceSolver::home(after, mover);
        let theirs = RaceSolver::home(after, mover.opponent());
        1.0 - self.win_prob(theirs, mine)
    }
}

/// Random race position: each side has `1..=max` checkers in its home board.
pub fn random_race(rng: &mut StreamRng, max: u8) -> Board {
    let mut b = Board::builder();
    for p in Player::BOTH {
        let n = rng.random_range(1..=max);
        let mut home = [0u8; 6];
        for _ in 0..n {
            home[rng.random_range(0..6)] += 1;
        }
        for (i, &c) in home.iter().enumerate() {
            if c > 0 {
                b = b.checkers(p, i as u8 + 1, c);
            }
        }
    }
    b.build().unwrap()
}

pub fn scripted_trajectory(seed: u64, perspectives: &[Player], winner: Player, model: &ValueModel) -> Trajectory {
    let mut rng = stream_rng(&[seed, 5]);
    let steps = perspectives
        .iter()
        .map(|&p| {
            let board = random_board(&mut rng);
            let features = encode(&board, p).unwrap();
            Step {
                value: model.value_of_features(&features),
                features,
                perspective: p,
                explored: false,
            }
        })
        .collect();
    Trajectory {
        steps,
        result: GameResult {
            winner,
            kind: WinKind::Single,
        },
    }
}

/// Σ_t α (z - V_t) ∇V_t, summed per perspective.
pub fn monte_carlo_delta(model: &ValueModel, t: &Trajectory, alpha: f64) -> Vec<f64> {
    let mut out = vec![0.0; DIMENSION];
    for (i, step) in t.steps.iter().enumerate() {
        let z = t.step_outcome(i);
        let v = logistic(step.features.as_slice().iter().zip(model.weights()).map(|(a, b)| a * b).sum());
        for (o, x) in out.iter_mut().zip(step.features.as_slice()) {
            *o += alpha * (z - step.value) * v * (1.0 - v) * x;
        }
    }
    out
}
