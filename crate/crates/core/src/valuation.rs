//! Position encoding, the logistic-linear value model and the greedy policy.
//!
//! The model estimates the probability that the side to move wins. A
//! candidate play is therefore judged by the value of its after-state with
//! the opponent to move, and the greedy policy picks the play that
//! minimises it.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{legal_plays_unchecked, Board, DiceRoll, MoveGen, Play, Player, CHECKERS};

pub const DIMENSION: usize = 198;
pub const FORMAT_VERSION: u32 = 1;

const OPPONENT_POINTS: usize = 96;
const MOVER_BAR: usize = 192;
const OPPONENT_BAR: usize = 193;
const MOVER_OFF: usize = 194;
const OPPONENT_OFF: usize = 195;
const MOVER_FLAG: usize = 196;

#[derive(Debug, Error)]
pub enum ValuationError {
    #[error("cannot encode a finished game")]
    Terminal,
    #[error("weight file: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported weight file format_version {0}")]
    UnknownFormat(u32),
    #[error("weight dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("unsupported link function `{0}`")]
    Link(String),
    #[error("weight {0} is not finite")]
    NonFinite(usize),
}

#[derive(Clone, PartialEq)]
pub struct FeatureVector {
    values: [f64; DIMENSION],
}

impl FeatureVector {
    pub fn zeros() -> FeatureVector {
        FeatureVector {
            values: [0.0; DIMENSION],
        }
    }

    pub fn from_slice(values: &[f64]) -> Option<FeatureVector> {
        let values: [f64; DIMENSION] = values.try_into().ok()?;
        Some(FeatureVector { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(x, w)| x * w).sum()
    }
}

impl std::fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let active: Vec<_> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        write!(f, "FeatureVector{active:?}")
    }
}

/// Units of one occupied point, relative to the point's first unit.
#[inline]
fn point_units(n: u8, mut f: impl FnMut(usize, f64)) {
    f(0, 1.0);
    if n >= 2 {
        f(1, 1.0);
    }
    if n >= 3 {
        f(2, 1.0);
    }
    if n > 3 {
        f(3, (n as f64 - 3.0) / 2.0);
    }
}

#[inline]
fn point_base(owner: Player, abs: u8, mover: Player) -> usize {
    let rel = owner.relative_point(abs) as usize;
    if owner == mover {
        (rel - 1) * 4
    } else {
        OPPONENT_POINTS + (rel - 1) * 4
    }
}

/// Calls `f(index, value)` for every non-zero feature of `board` seen by `mover`.
#[inline]
fn visit_features(board: &Board, mover: Player, mut f: impl FnMut(usize, f64)) {
    for abs in 1..=24u8 {
        if let Some((owner, n)) = board.point(abs) {
            let base = point_base(owner, abs, mover);
            point_units(n, |i, v| f(base + i, v));
        }
    }
    let opp = mover.opponent();
    let pairs = [
        (MOVER_BAR, board.bar(mover) as f64 / 2.0),
        (OPPONENT_BAR, board.bar(opp) as f64 / 2.0),
        (MOVER_OFF, board.off(mover) as f64 / 15.0),
        (OPPONENT_OFF, board.off(opp) as f64 / 15.0),
        (MOVER_FLAG, 1.0),
    ];
    for (i, v) in pairs {
        if v != 0.0 {
            f(i, v);
        }
    }
}

const COUNTS: usize = 2 * CHECKERS as usize + 1;

/// Score contribution of every (mover, point, signed count), so scoring a
/// board is one lookup per point.
type PointTable = [[[f64; COUNTS]; 24]; 2];

fn point_table(weights: &[f64]) -> Box<PointTable> {
    let mut table = Box::new([[[0.0; COUNTS]; 24]; 2]);
    for mover in Player::BOTH {
        for abs in 1..=24u8 {
            for n in 1..=CHECKERS {
                for owner in Player::BOTH {
                    let base = point_base(owner, abs, mover);
                    let mut s = 0.0;
                    point_units(n, |i, v| s += weights[base + i] * v);
                    let signed = owner.sign() as isize * n as isize;
                    table[mover.index()][abs as usize - 1][(signed + CHECKERS as isize) as usize] = s;
                }
            }
        }
    }
    table
}

pub fn encode(board: &Board, to_move: Player) -> Result<FeatureVector, ValuationError> {
    if board.terminal().is_some() {
        return Err(ValuationError::Terminal);
    }
    let mut x = FeatureVector::zeros();
    visit_features(board, to_move, |i, v| x.values[i] = v);
    Ok(x)
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Linear weights over the 198 features, squashed by a logistic link.
#[derive(Clone)]
pub struct ValueModel {
    weights: Vec<f64>,
    table: Box<PointTable>,
}

impl PartialEq for ValueModel {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl std::fmt::Debug for ValueModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ValueModel").field("weights", &self.weights).finish()
    }
}

impl Default for ValueModel {
    fn default() -> Self {
        ValueModel::zeros()
    }
}

impl ValueModel {
    pub fn zeros() -> ValueModel {
        ValueModel::checked(vec![0.0; DIMENSION])
    }

    fn checked(weights: Vec<f64>) -> ValueModel {
        let table = point_table(&weights);
        ValueModel { weights, table }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<ValueModel, ValuationError> {
        if weights.len() != DIMENSION {
            return Err(ValuationError::Dimension {
                expected: DIMENSION,
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(ValuationError::NonFinite(i));
        }
        Ok(ValueModel::checked(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// New model with `delta` added to the weights.
    pub fn with_delta(&self, delta: &[f64]) -> Result<ValueModel, ValuationError> {
        let weights = self
            .weights
            .iter()
            .zip(delta)
            .map(|(w, d)| w + d)
            .collect();
        ValueModel::from_weights(weights)
    }

    pub fn scaled(&self, factor: f64) -> ValueModel {
        ValueModel::checked(self.weights.iter().map(|w| w * factor).collect())
    }

    /// Pre-link score w·x for a non-terminal board.
    #[inline]
    pub fn score(&self, board: &Board, to_move: Player) -> f64 {
        let table = &self.table[to_move.index()];
        let mut s = 0.0;
        for (row, &c) in table.iter().zip(&board.points) {
            s += row[(c as isize + CHECKERS as isize) as usize];
        }
        let opp = to_move.opponent();
        s + self.weights[MOVER_BAR] * (board.bar(to_move) as f64 / 2.0)
            + self.weights[OPPONENT_BAR] * (board.bar(opp) as f64 / 2.0)
            + self.weights[MOVER_OFF] * (board.off(to_move) as f64 / 15.0)
            + self.weights[OPPONENT_OFF] * (board.off(opp) as f64 / 15.0)
            + self.weights[MOVER_FLAG]
    }

    pub fn value_of_features(&self, features: &FeatureVector) -> f64 {
        logistic(features.dot(&self.weights))
    }

    /// Probability that `to_move` wins. Finished games score 1 or 0.
    pub fn value(&self, board: &Board, to_move: Player) -> f64 {
        match board.terminal() {
            Some(r) => {
                if r.winner == to_move {
                    1.0
                } else {
                    0.0
                }
            }
            None => logistic(self.score(board, to_move)),
        }
    }

    /// d value / d weights = V (1 - V) x.
    pub fn grad(&self, features: &FeatureVector) -> Vec<f64> {
        let v = self.value_of_features(features);
        let scale = v * (1.0 - v);
        features.values.iter().map(|x| scale * x).collect()
    }

    /// Sort key for a candidate after-state of `mover`: lower is better for
    /// the mover. An immediate win ranks below every non-terminal position.
    #[inline]
    pub(crate) fn after_key(&self, after: &Board, mover: Player) -> f64 {
        match after.terminal() {
            Some(r) if r.winner == mover => f64::NEG_INFINITY,
            Some(_) => f64::INFINITY,
            None => self.score(after, mover.opponent()),
        }
    }
}

pub fn value(model: &ValueModel, board: &Board, to_move: Player) -> f64 {
    model.value(board, to_move)
}

pub fn grad(model: &ValueModel, features: &FeatureVector) -> Vec<f64> {
    model.grad(features)
}

#[inline]
fn better(a: (f64, &Board), b: (f64, &Board)) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1 < b.1,
    }
}

/// The base policy: the play whose after-state leaves the opponent the
/// lowest winning chance. Ties go to the first play in canonical order.
pub fn greedy_play(model: &ValueModel, board: &Board, player: Player, roll: DiceRoll) -> Play {
    let plays = legal_plays_unchecked(board, player, roll);
    if plays.len() == 1 {
        return plays.into_iter().next().expect("one play");
    }
    let mut best = 0;
    let mut best_key = f64::INFINITY;
    for (i, p) in plays.iter().enumerate() {
        let key = model.after_key(&p.after, player);
        if i == 0 || key < best_key {
            best = i;
            best_key = key;
        }
    }
    plays.into_iter().nth(best).expect("index in range")
}

/// Greedy choice that only needs the resulting board; reuses `gen`.
pub(crate) fn greedy_after(
    model: &ValueModel,
    gen: &mut MoveGen,
    board: &Board,
    player: Player,
    roll: DiceRoll,
) -> Board {
    let leaves = gen.generate(board, player, roll);
    let mut best = &leaves[0].after;
    if leaves.len() == 1 {
        return *best;
    }
    let mut best_key = model.after_key(best, player);
    for leaf in &leaves[1..] {
        let key = model.after_key(&leaf.after, player);
        if better((key, &leaf.after), (best_key, best)) {
            best = &leaf.after;
            best_key = key;
        }
    }
    *best
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub games_trained: u64,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
    pub created_at: String,
}

/// On-disk weight file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format_version: u32,
    pub dimension: usize,
    pub link: String,
    pub weights: Vec<f64>,
    pub metadata: ModelMetadata,
}

impl WeightFile {
    pub fn new(model: &ValueModel, metadata: ModelMetadata) -> WeightFile {
        WeightFile {
            format_version: FORMAT_VERSION,
            dimension: DIMENSION,
            link: "logistic".to_string(),
            weights: model.weights.clone(),
            metadata,
        }
    }

    pub fn from_json(text: &str) -> Result<WeightFile, ValuationError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if version != FORMAT_VERSION {
            return Err(ValuationError::UnknownFormat(version));
        }
        let file: WeightFile = serde_json::from_value(raw)?;
        if file.dimension != DIMENSION {
            return Err(ValuationError::Dimension {
                expected: DIMENSION,
                found: file.dimension,
            });
        }
        if file.weights.len() != file.dimension {
            return Err(ValuationError::Dimension {
                expected: file.dimension,
                found: file.weights.len(),
            });
        }
        if file.link != "logistic" {
            return Err(ValuationError::Link(file.link));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weight file serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<WeightFile, ValuationError> {
        WeightFile::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ValuationError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn model(&self) -> Result<ValueModel, ValuationError> {
        ValueModel::from_weights(self.weights.clone())
    }
}
