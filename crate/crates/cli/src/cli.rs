//! Command line front end.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gammon_core::arena::{run_match, MatchConfig};
use gammon_core::game::{
    legal_plays, opening_roll, parse_notation, resolve_play, roll_dice, Board, DiceRoll, Player,
};
use gammon_core::rng::stream_rng;
use gammon_core::rollout::{analyze, RolloutConfig};
use gammon_core::strategy::{BuildContext, GreedyStrategy, RolloutStrategy, Strategy, StrategyRegistry, TurnContext};
use gammon_core::training::{train_with, TrainConfig};
use gammon_core::valuation::{ModelMetadata, ValueModel, WeightFile, DIMENSION};

use crate::service;

#[derive(Parser, Debug)]
#[command(name = "rollout-gammon", version, about = "Backgammon engine: TD training, rollouts, tournaments")]
pub struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a value model by self-play.
    Train(TrainArgs),
    /// Play a match between two strategies.
    Tournament(TournamentArgs),
    /// Roll out every legal play of a position.
    Analyze(AnalyzeArgs),
    /// Play against the engine in the terminal.
    Play(PlayArgs),
    /// Rewrite a weight file in the current format.
    Export(ExportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct WeightsArg {
    /// Weight file; defaults to $ROLLOUT_GAMMON_WEIGHTS.
    #[arg(long, env = "ROLLOUT_GAMMON_WEIGHTS")]
    pub weights: Option<PathBuf>,
}

impl WeightsArg {
    fn load(&self) -> Result<ValueModel> {
        let path = self
            .weights
            .as_ref()
            .context("no weight file given (use --weights or ROLLOUT_GAMMON_WEIGHTS)")?;
        load_model(path)
    }
}

pub fn load_model(path: &Path) -> Result<ValueModel> {
    let file = WeightFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.model()?)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub games: u64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_games: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Benchmark games against Random after each batch (0 disables).
    #[arg(long, default_value_t = 200)]
    pub eval_games: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Learning-curve log; defaults to `<out>.curve.jsonl`.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TournamentArgs {
    /// Player A, e.g. `greedy` or `rollout:samples=54`.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub games: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub weights: WeightsArg,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Keep per-game transcripts in the report.
    #[arg(long)]
    pub transcripts: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub weights: WeightsArg,
    /// Board in text form (26 integers); defaults to the starting position.
    #[arg(long)]
    pub position: Option<String>,
    #[arg(long, default_value = "white")]
    pub to_move: Player,
    /// Dice, e.g. `31` or `3-1`.
    #[arg(long)]
    pub roll: DiceRoll,
    #[arg(long, default_value_t = 108, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Roll out only the best k candidates by static value.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Greedy,
    Rollout,
}

#[derive(Args, Debug)]
pub struct PlayArgs {
    #[command(flatten)]
    pub weights: WeightsArg,
    #[arg(long, value_enum, default_value = "greedy")]
    pub engine: Engine,
    #[arg(long, default_value_t = 108, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Side played by the human.
    #[arg(long, default_value = "white")]
    pub side: Player,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Weight file, or a bare JSON array of weights.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: String,
    #[command(flatten)]
    pub weights: WeightsArg,
    /// Default rollout workers for engine moves and analyses.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(args),
        Command::Tournament(args) => tournament(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Play(args) => {
            let stdin = std::io::stdin();
            play(args, &mut stdin.lock(), &mut std::io::stdout())
        }
        Command::Export(args) => export(args),
        Command::Serve(args) => serve(args),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let config = TrainConfig {
        alpha: args.alpha,
        lambda: args.lambda,
        epsilon: args.epsilon,
        games: args.games,
        workers: args.workers as usize,
        batch_games: args.batch_games,
        seed: args.seed,
        eval_games: args.eval_games,
        ..TrainConfig::default()
    };
    config.validate()?;
    let curve_path = args
        .curve
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.curve.jsonl", args.out.display())));
    let mut curve = BufWriter::new(
        File::create(&curve_path).with_context(|| format!("creating {}", curve_path.display()))?,
    );
    let mut write_error = None;
    let (model, _) = train_with(&config, |entry| {
        log::info!(
            "batch {} games {} mean|delta| {:.5} vs random {}",
            entry.batch,
            entry.games,
            entry.mean_abs_delta,
            entry.winrate_vs_random.map_or("-".into(), |w| format!("{w:.3}"))
        );
        let line = serde_json::to_string(entry).expect("curve entry serializes");
        if let Err(e) = writeln!(curve, "{line}") {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e).context("writing learning curve");
    }
    curve.flush()?;
    let metadata = ModelMetadata {
        games_trained: args.games,
        alpha: args.alpha,
        lambda: args.lambda,
        seed: args.seed,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    WeightFile::new(&model, metadata)
        .write(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} and {}", args.out.display(), curve_path.display());
    Ok(())
}

fn tournament(args: TournamentArgs) -> Result<()> {
    let model = match &args.weights.weights {
        Some(_) => Some(Arc::new(args.weights.load()?)),
        None => None,
    };
    let ctx = BuildContext {
        model,
        rollout: RolloutConfig::default(),
    };
    let registry = StrategyRegistry::with_builtins();
    let a = registry.build(&args.a, &ctx)?;
    let b = registry.build(&args.b, &ctx)?;
    let config = MatchConfig {
        games: args.games as usize,
        seed: args.seed,
        workers: args.workers.max(1),
        keep_transcripts: args.transcripts,
    };
    let report = run_match(a.as_ref(), b.as_ref(), &config)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let model = args.weights.load()?;
    let board = match &args.position {
        Some(text) => Board::from_text(text)?,
        None => Board::initial(),
    };
    let config = RolloutConfig {
        samples_per_candidate: args.samples,
        workers: args.workers,
        seed_base: args.seed,
        candidate_cap: args.cap,
        ..RolloutConfig::default()
    };
    let report = analyze(&model, &board, args.to_move, args.roll, &config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Plain-text diagram, White's home at the bottom right.
pub fn render(board: &Board) -> String {
    let cell = |abs: u8| match board.point(abs) {
        Some((Player::White, n)) => format!("W{n:<2}"),
        Some((Player::Red, n)) => format!("R{n:<2}"),
        None => " . ".to_string(),
    };
    let row = |points: &[u8]| points.iter().map(|&p| cell(p)).collect::<Vec<_>>().join(" ");
    let top: Vec<u8> = (13..=24).collect();
    let bottom: Vec<u8> = (1..=12).rev().collect();
    let labels = |points: &[u8]| points.iter().map(|p| format!("{p:<3}")).collect::<Vec<_>>().join(" ");
    format!(
        "{}\n{}\n bar W{} R{}   off W{} R{}   pips W{} R{}\n{}\n{}\n",
        labels(&top),
        row(&top),
        board.bar(Player::White),
        board.bar(Player::Red),
        board.off(Player::White),
        board.off(Player::Red),
        board.pip_count(Player::White),
        board.pip_count(Player::Red),
        row(&bottom),
        labels(&bottom),
    )
}

/// Interactive game; the human answers with a play number, notation, or `quit`.
pub fn play(args: PlayArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let model = Arc::new(args.weights.load()?);
    let engine: Box<dyn Strategy> = match args.engine {
        Engine::Greedy => Box::new(GreedyStrategy::new(model)),
        Engine::Rollout => Box::new(RolloutStrategy::new(
            model,
            RolloutConfig {
                samples_per_candidate: args.samples,
                workers: args.workers,
                ..RolloutConfig::default()
            },
        )?),
    };
    let seed = args.seed.unwrap_or_else(rand::random);
    let mut dice = stream_rng(&[seed, 0]);
    let mut engine_rng = stream_rng(&[seed, 1]);
    let mut board = Board::initial();
    let (mut to_move, mut roll) = opening_roll(&mut dice);
    writeln!(out, "game seed {seed}; you play {}", args.side)?;
    let mut ply = 0u32;
    let result = loop {
        if let Some(result) = board.terminal() {
            break result;
        }
        if ply > 0 {
            roll = roll_dice(&mut dice);
        }
        write!(out, "\n{}", render(&board))?;
        if to_move == args.side {
            let plays = legal_plays(&board, to_move, roll)?;
            writeln!(out, "{to_move} to play {roll}:")?;
            for (i, p) in plays.iter().enumerate() {
                writeln!(out, "  {:>3}  {}", i + 1, p.notation(to_move))?;
            }
            let chosen = loop {
                write!(out, "> ")?;
                out.flush()?;
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    bail!("input closed before the game finished");
                }
                let line = line.trim();
                if line.eq_ignore_ascii_case("quit") {
                    writeln!(out, "resigned")?;
                    return Ok(());
                }
                if let Ok(n) = line.parse::<usize>() {
                    match plays.get(n.wrapping_sub(1)) {
                        Some(p) => break p.clone(),
                        None => {
                            writeln!(out, "choose 1..{}", plays.len())?;
                            continue;
                        }
                    }
                }
                match parse_notation(line).and_then(|specs| resolve_play(&board, to_move, roll, &specs)) {
                    Ok(p) => break p,
                    Err(e) => writeln!(out, "{e}")?,
                }
            };
            board = chosen.after;
        } else {
            let mut ctx = TurnContext {
                game_seed: seed,
                ply,
                rng: &mut engine_rng,
            };
            let chosen = engine.choose(&board, to_move, roll, &mut ctx)?;
            writeln!(out, "{to_move} rolls {roll} and plays {}", chosen.notation(to_move))?;
            board = chosen.after;
        }
        to_move = to_move.opponent();
        ply += 1;
    };
    write!(out, "\n{}", render(&board))?;
    writeln!(
        out,
        "{} wins {} point(s)",
        result.winner,
        result.kind.points()
    )?;
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let file = match serde_json::from_str::<Vec<f64>>(&text) {
        Ok(weights) => {
            if weights.len() != DIMENSION {
                bail!("expected {DIMENSION} weights, found {}", weights.len());
            }
            WeightFile::new(&ValueModel::from_weights(weights)?, ModelMetadata::default())
        }
        Err(_) => {
            let file = WeightFile::from_json(&text)?;
            file.model()?;
            WeightFile::new(&file.model()?, file.metadata)
        }
    };
    file.write(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let path = args
        .weights
        .weights
        .clone()
        .context("no weight file given (use --weights or ROLLOUT_GAMMON_WEIGHTS)")?;
    let defaults = RolloutConfig {
        workers: args.workers.max(1),
        ..RolloutConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let state = service::AppState::loading(rand::random(), defaults);
        let loader = state.clone();
        tokio::task::spawn_blocking(move || match load_model(&path) {
            Ok(model) => {
                loader.set_model(Arc::new(model));
                log::info!("model loaded from {}", path.display());
            }
            Err(e) => log::error!("failed to load model: {e:#}"),
        });
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
