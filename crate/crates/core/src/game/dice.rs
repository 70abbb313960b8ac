use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::board::Player;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct DiceRoll {
    d1: u8,
    d2: u8,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("invalid dice roll: {0}")]
pub struct DiceError(String);

impl DiceRoll {
    pub fn new(d1: u8, d2: u8) -> Result<DiceRoll, DiceError> {
        if (1..=6).contains(&d1) && (1..=6).contains(&d2) {
            Ok(DiceRoll { d1, d2 })
        } else {
            Err(DiceError(format!("({d1}, {d2})")))
        }
    }

    pub fn first(self) -> u8 {
        self.d1
    }

    pub fn second(self) -> u8 {
        self.d2
    }

    pub fn is_double(self) -> bool {
        self.d1 == self.d2
    }

    pub fn high(self) -> u8 {
        self.d1.max(self.d2)
    }

    pub fn low(self) -> u8 {
        self.d1.min(self.d2)
    }

    /// All 21 distinct rolls with their probability weight out of 36.
    pub fn all_with_weights() -> impl Iterator<Item = (DiceRoll, u32)> {
        (1..=6u8).flat_map(|a| {
            (a..=6u8).map(move |b| (DiceRoll { d1: b, d2: a }, if a == b { 1 } else { 2 }))
        })
    }
}

impl fmt::Display for DiceRoll {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.d1, self.d2)
    }
}

impl FromStr for DiceRoll {
    type Err = DiceError;

    /// Accepts "31", "3,1", "3-1" or "3 1".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits: Vec<u8> = s
            .chars()
            .filter(|c| !matches!(c, ',' | '-' | ' ' | '(' | ')'))
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| DiceError(s.to_string()))?;
        match digits[..] {
            [a, b] => DiceRoll::new(a, b),
            _ => Err(DiceError(s.to_string())),
        }
    }
}

impl TryFrom<[u8; 2]> for DiceRoll {
    type Error = DiceError;

    fn try_from(value: [u8; 2]) -> Result<Self, Self::Error> {
        DiceRoll::new(value[0], value[1])
    }
}

impl From<DiceRoll> for [u8; 2] {
    fn from(roll: DiceRoll) -> Self {
        [roll.d1, roll.d2]
    }
}

pub fn roll_dice<R: Rng + ?Sized>(rng: &mut R) -> DiceRoll {
    DiceRoll {
        d1: rng.random_range(1..=6),
        d2: rng.random_range(1..=6),
    }
}

/// Opening roll: each side throws one die until they differ. The higher die
/// moves first and plays both dice, its own die listed first.
pub fn opening_roll<R: Rng + ?Sized>(rng: &mut R) -> (Player, DiceRoll) {
    loop {
        let white: u8 = rng.random_range(1..=6);
        let red: u8 = rng.random_range(1..=6);
        if white != red {
            return if white > red {
                (Player::White, DiceRoll { d1: white, d2: red })
            } else {
                (Player::Red, DiceRoll { d1: red, d2: white })
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn fixed_seed_is_reproducible() {
        let mut a = stream_rng(&[42]);
        let mut b = stream_rng(&[42]);
        let xs: Vec<_> = (0..50).map(|_| roll_dice(&mut a)).collect();
        let ys: Vec<_> = (0..50).map(|_| roll_dice(&mut b)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn face_and_double_frequencies_within_five_sigma() {
        let n = 100_000usize;
        let mut rng = stream_rng(&[7, 7]);
        let mut faces = [0usize; 6];
        let mut doubles = 0usize;
        for _ in 0..n {
            let r = roll_dice(&mut rng);
            faces[r.first() as usize - 1] += 1;
            faces[r.second() as usize - 1] += 1;
            doubles += r.is_double() as usize;
        }
        let p = 1.0 / 6.0;
        // 2n face observations
        let draws = 2.0 * n as f64;
        let sigma = (draws * p * (1.0 - p)).sqrt();
        for &f in &faces {
            assert!((f as f64 - draws * p).abs() < 5.0 * sigma, "faces {faces:?}");
        }
        let sigma_d = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((doubles as f64 - n as f64 * p).abs() < 5.0 * sigma_d);
    }

    #[test]
    fn opening_roll_is_never_double() {
        let mut rng = stream_rng(&[3]);
        for _ in 0..1000 {
            let (first, roll) = opening_roll(&mut rng);
            assert!(!roll.is_double());
            assert!(roll.first() > roll.second());
            let _ = first;
        }
    }

    #[test]
    fn weights_sum_to_36() {
        assert_eq!(DiceRoll::all_with_weights().map(|(_, w)| w).sum::<u32>(), 36);
        assert_eq!(DiceRoll::all_with_weights().count(), 21);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("31".parse::<DiceRoll>().unwrap(), DiceRoll::new(3, 1).unwrap());
        assert_eq!("6,6".parse::<DiceRoll>().unwrap(), DiceRoll::new(6, 6).unwrap());
        assert!("70".parse::<DiceRoll>().is_err());
        assert!("123".parse::<DiceRoll>().is_err());
    }
}
