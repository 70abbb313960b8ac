mod common;

use std::sync::Arc;

use common::{monte_carlo_delta, random_board, scripted_trajectory};
use gammon_core::arena::{run_match, MatchConfig};
use gammon_core::game::{legal_plays, Player};
use gammon_core::rng::stream_rng;
use gammon_core::strategy::{GreedyStrategy, RandomStrategy};
use gammon_core::training::{self_play_game, td_update, train, TrainConfig};
use gammon_core::valuation::{encode, greedy_play, logistic, FeatureVector, ValueModel, DIMENSION};
use rand::Rng;

fn random_model(seed: u64, scale: f64) -> ValueModel {
    let mut rng = stream_rng(&[seed, 77]);
    ValueModel::from_weights((0..DIMENSION).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn finite_difference(weights: &[f64], x: &FeatureVector, i: usize, h: f64) -> f64 {
    let f = |wi: f64| {
        let mut w = weights.to_vec();
        w[i] = wi;
        logistic(x.as_slice().iter().zip(&w).map(|(a, b)| a * b).sum())
    };
    (f(weights[i] + h) - f(weights[i] - h)) / (2.0 * h)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = stream_rng(&[31]);
    for instance in 0..25u64 {
        let model = random_model(instance, 0.3);
        let board = random_board(&mut rng);
        let x = encode(&board, Player::White).unwrap();
        let g = model.grad(&x);
        for i in 0..DIMENSION {
            let fd = finite_difference(model.weights(), &x, i, 1e-5);
            let scale = g[i].abs().max(fd.abs());
            if scale == 0.0 {
                continue;
            }
            assert!((g[i] - fd).abs() / scale <= 1e-6, "instance {instance} component {i}: {} vs {fd}", g[i]);
        }
    }
}

#[test]
fn scaling_weights_keeps_greedy_choice() {
    let mut rng = stream_rng(&[8]);
    let model = random_model(3, 0.5);
    for _ in 0..100 {
        let board = random_board(&mut rng);
        let roll = common::random_roll(&mut rng);
        let a = greedy_play(&model, &board, Player::White, roll);
        let b = greedy_play(&model.scaled(3.5), &board, Player::White, roll);
        assert_eq!(a.after, b.after);
    }
}

#[test]
fn shifting_every_candidate_score_keeps_choice() {
    // The mover-identity unit is active in every encoding, so its weight
    // shifts all candidate scores by the same constant.
    let mut rng = stream_rng(&[9]);
    let model = random_model(5, 0.5);
    let mut shifted = model.weights().to_vec();
    shifted[196] += 2.5;
    let shifted = ValueModel::from_weights(shifted).unwrap();
    for _ in 0..100 {
        let board = random_board(&mut rng);
        let roll = common::random_roll(&mut rng);
        assert_eq!(
            greedy_play(&model, &board, Player::Red, roll).after,
            greedy_play(&shifted, &board, Player::Red, roll).after
        );
    }
}

#[test]
fn greedy_is_the_static_argmin() {
    let mut rng = stream_rng(&[10]);
    let model = random_model(6, 0.5);
    for _ in 0..100 {
        let board = random_board(&mut rng);
        let roll = common::random_roll(&mut rng);
        let plays = legal_plays(&board, Player::White, roll).unwrap();
        let chosen = greedy_play(&model, &board, Player::White, roll);
        let v = |b| model.value(b, Player::Red);
        let best = plays.iter().map(|p| v(&p.after)).fold(f64::INFINITY, f64::min);
        assert_eq!(v(&chosen.after), best);
        let first_best = plays.iter().find(|p| v(&p.after) == best).unwrap();
        assert_eq!(first_best.after, chosen.after);
    }
}

#[test]
fn encoding_separates_distinct_boards() {
    let mut rng = stream_rng(&[12]);
    let boards: Vec<_> = (0..300).map(|_| random_board(&mut rng)).collect();
    for (i, a) in boards.iter().enumerate() {
        for b in &boards[i + 1..] {
            if a != b {
                assert_ne!(encode(a, Player::White).unwrap(), encode(b, Player::White).unwrap());
            }
        }
    }
}

#[test]
fn lambda_one_equals_monte_carlo_update() {
    let model = random_model(21, 0.2);
    let cases: [&[Player]; 3] = [
        &[Player::White, Player::White, Player::White],
        &[Player::Red, Player::White, Player::Red],
        &[Player::White, Player::Red, Player::White],
    ];
    for (k, perspectives) in cases.iter().enumerate() {
        for winner in Player::BOTH {
            let t = scripted_trajectory(k as u64, perspectives, winner, &model);
            let td = td_update(&model, &t, 0.1, 1.0);
            let mc = monte_carlo_delta(&model, &t, 0.1);
            for (a, b) in td.iter().zip(&mc) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn td_errors_telescope() {
    let model = random_model(2, 0.1);
    for seed in 0..30 {
        let t = self_play_game(&model, &mut stream_rng(&[seed]), 0.05).unwrap();
        for p in Player::BOTH {
            let first = t.steps.iter().find(|s| s.perspective == p).unwrap().value;
            let sum: f64 = t.td_errors(p).iter().sum();
            assert!((sum - (t.outcome(p) - first)).abs() < 1e-12);
        }
    }
}

#[test]
fn td_update_does_not_touch_inputs() {
    let model = random_model(4, 0.2);
    let before = model.clone();
    let t = self_play_game(&model, &mut stream_rng(&[1]), 0.0).unwrap();
    let steps = t.steps.len();
    let delta = td_update(&model, &t, 0.1, 0.7);
    assert_eq!(model, before);
    assert_eq!(t.steps.len(), steps);
    assert!(delta.iter().any(|d| *d != 0.0));
}

#[test]
fn training_is_independent_of_worker_count() {
    let base = TrainConfig {
        games: 192,
        batch_games: 64,
        eval_games: 8,
        ..TrainConfig::default()
    };
    let (m1, c1) = train(&TrainConfig { workers: 1, ..base.clone() }).unwrap();
    for workers in [3, 8] {
        let (m, c) = train(&TrainConfig { workers, ..base.clone() }).unwrap();
        let bits = |m: &ValueModel| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&m1));
        assert_eq!(c, c1);
    }
    assert_eq!(c1.len(), 3);
    assert_eq!(c1.last().unwrap().games, 192);
}

#[test]
fn short_training_beats_random() {
    let config = TrainConfig {
        games: 2000,
        batch_games: 8,
        eval_games: 0,
        ..TrainConfig::default()
    };
    let (model, _) = train(&config).unwrap();
    let greedy = GreedyStrategy::new(Arc::new(model));
    let report = run_match(&greedy, &RandomStrategy, &MatchConfig { games: 400, seed: 3, ..Default::default() }).unwrap();
    assert!(report.win_fraction_a > 0.9, "{}", report.to_table());
}
