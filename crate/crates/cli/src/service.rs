//! HTTP JSON service: in-memory game sessions against the engine plus
//! stateless rollout analysis.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gammon_core::game::{
    apply_play, legal_plays, opening_roll, parse_notation, resolve_play, roll_dice, Board,
    DiceRoll, GameResult, Play, PlayError, Player,
};
use gammon_core::rng::{stream_rng, stream_seed, StreamRng};
use gammon_core::rollout::{analyze, rollout_decide, AnalysisReport, RolloutConfig, Score};
use gammon_core::strategy::RolloutStrategy;
use gammon_core::valuation::{greedy_play, ValueModel};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`"))
    }

    fn conflict(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn unprocessable(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn loading() -> ApiError {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is still loading")
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }

    fn illegal(err: PlayError) -> ApiError {
        let mut body = json!({ "error": err.to_string() });
        if let PlayError::IllegalMove {
            index,
            notation,
            reason,
        } = &err
        {
            body["illegal_move"] = json!({ "index": index, "move": notation, "rule": reason.to_string() });
        }
        ApiError {
            status: StatusCode::CONFLICT,
            body,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    #[default]
    Greedy,
    Rollout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingHuman,
    AwaitingEngine,
    Finished,
}

/// Rollout settings a client may override; unset fields keep the defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutOverrides {
    pub samples: Option<u64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub cap: Option<usize>,
    pub score: Option<Score>,
}

impl RolloutOverrides {
    fn apply(&self, mut config: RolloutConfig) -> Result<RolloutConfig, ApiError> {
        if let Some(v) = self.samples {
            config.samples_per_candidate = v;
        }
        if let Some(v) = self.workers {
            config.workers = v;
        }
        if let Some(v) = self.seed {
            config.seed_base = v;
        }
        if self.cap.is_some() {
            config.candidate_cap = self.cap;
        }
        if let Some(v) = self.score {
            config.score = v;
        }
        config
            .validate()
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Clone, Debug)]
struct HistoryEntry {
    player: Player,
    roll: DiceRoll,
    play: Play,
}

#[derive(Clone)]
struct Session {
    id: String,
    seed: u64,
    board: Board,
    to_move: Player,
    first_mover: Player,
    opening: Option<DiceRoll>,
    pending_roll: Option<DiceRoll>,
    history: Vec<HistoryEntry>,
    engine_side: Player,
    engine_kind: EngineKind,
    rollout: RolloutConfig,
    dice: StreamRng,
}

#[derive(Serialize)]
pub struct HistoryView {
    pub player: Player,
    pub roll: DiceRoll,
    pub play: String,
    pub after: Board,
}

#[derive(Serialize)]
pub struct SessionView {
    pub id: String,
    pub seed: u64,
    pub board: Board,
    pub to_move: Player,
    pub first_mover: Player,
    pub pending_roll: Option<DiceRoll>,
    pub history: Vec<HistoryView>,
    pub engine_side: Player,
    pub engine_kind: EngineKind,
    pub status: Status,
    /// `roll`, `play` or `finished`.
    pub phase: &'static str,
    pub result: Option<GameResult>,
    pub rollout: RolloutConfig,
}

impl Session {
    fn result(&self) -> Option<GameResult> {
        self.board.terminal()
    }

    fn status(&self) -> Status {
        if self.result().is_some() {
            Status::Finished
        } else if self.to_move == self.engine_side {
            Status::AwaitingEngine
        } else {
            Status::AwaitingHuman
        }
    }

    fn view(&self) -> SessionView {
        let status = self.status();
        SessionView {
            id: self.id.clone(),
            seed: self.seed,
            board: self.board,
            to_move: self.to_move,
            first_mover: self.first_mover,
            pending_roll: self.pending_roll,
            history: self
                .history
                .iter()
                .map(|h| HistoryView {
                    player: h.player,
                    roll: h.roll,
                    play: h.play.notation(h.player),
                    after: h.play.after,
                })
                .collect(),
            engine_side: self.engine_side,
            engine_kind: self.engine_kind,
            status,
            phase: match (status, self.pending_roll) {
                (Status::Finished, _) => "finished",
                (_, None) => "roll",
                (_, Some(_)) => "play",
            },
            result: self.result(),
            rollout: self.rollout.clone(),
        }
    }

    fn roll(&mut self) -> Result<DiceRoll, ApiError> {
        if self.result().is_some() {
            return Err(ApiError::conflict("game is finished"));
        }
        if let Some(roll) = self.pending_roll {
            return Err(ApiError::conflict(format!("dice already rolled: {roll}")));
        }
        let roll = self.opening.take().unwrap_or_else(|| roll_dice(&mut self.dice));
        self.pending_roll = Some(roll);
        Ok(roll)
    }

    fn commit(&mut self, play: Play) {
        let roll = self.pending_roll.take().expect("commit needs a pending roll");
        self.history.push(HistoryEntry {
            player: self.to_move,
            roll,
            play: play.clone(),
        });
        self.board = play.after;
        self.to_move = self.to_move.opponent();
    }

    /// Replays the history from the starting position and compares.
    fn check_replay(&self) -> Result<(), ApiError> {
        let mut board = Board::initial();
        let mut player = self.first_mover;
        for (i, h) in self.history.iter().enumerate() {
            if h.player != player {
                return Err(ApiError::internal(format!("history entry {i} out of turn")));
            }
            board = apply_play(&board, player, &h.play)
                .map_err(|e| ApiError::internal(format!("history entry {i} does not replay: {e}")))?;
            player = player.opponent();
        }
        if board != self.board || player != self.to_move {
            return Err(ApiError::internal("session state diverged from its history"));
        }
        Ok(())
    }
}

struct SessionCell {
    /// Serializes mutations of one session.
    writer: tokio::sync::Mutex<()>,
    state: RwLock<Session>,
}

impl SessionCell {
    fn snapshot(&self) -> Session {
        self.state.read().expect("session lock").clone()
    }

    fn store(&self, session: Session) -> Result<SessionView, ApiError> {
        session.check_replay()?;
        let view = session.view();
        *self.state.write().expect("session lock") = session;
        Ok(view)
    }
}

#[derive(Clone)]
pub struct AppState {
    model: Arc<OnceLock<Arc<ValueModel>>>,
    sessions: Arc<RwLock<HashMap<String, Arc<SessionCell>>>>,
    counter: Arc<AtomicU64>,
    id_seed: u64,
    default_rollout: RolloutConfig,
}

impl AppState {
    /// State whose model is supplied later through [`AppState::set_model`].
    pub fn loading(id_seed: u64, default_rollout: RolloutConfig) -> AppState {
        AppState {
            model: Arc::new(OnceLock::new()),
            sessions: Arc::default(),
            counter: Arc::default(),
            id_seed,
            default_rollout,
        }
    }

    pub fn with_model(model: Arc<ValueModel>, id_seed: u64, default_rollout: RolloutConfig) -> AppState {
        let state = AppState::loading(id_seed, default_rollout);
        state.set_model(model);
        state
    }

    pub fn set_model(&self, model: Arc<ValueModel>) {
        let _ = self.model.set(model);
    }

    fn model(&self) -> Result<Arc<ValueModel>, ApiError> {
        self.model.get().cloned().ok_or_else(ApiError::loading)
    }

    fn cell(&self, id: &str) -> Result<Arc<SessionCell>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/games", post(create_game))
        .route("/games/{id}", get(get_game))
        .route("/games/{id}/roll", post(roll))
        .route("/games/{id}/legal", get(legal))
        .route("/games/{id}/play", post(play))
        .route("/games/{id}/engine-move", post(engine_move))
        .route("/analyze", post(analyze_position))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_loaded": state.model.get().is_some() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewGame {
    #[serde(default)]
    pub engine_side: Option<Player>,
    #[serde(default)]
    pub engine_kind: Option<EngineKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub rollout: Option<RolloutOverrides>,
}

async fn create_game(
    State(state): State<AppState>,
    body: Option<Json<NewGame>>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let request = body.map(|Json(b)| b).unwrap_or_default();
    let n = state.counter.fetch_add(1, Ordering::Relaxed);
    let id = format!("{:016x}", stream_seed(&[state.id_seed, n]));
    let seed = request.seed.unwrap_or_else(|| stream_seed(&[state.id_seed, n, 1]));
    let rollout = request
        .rollout
        .unwrap_or_default()
        .apply(state.default_rollout.clone())?;
    let mut dice = stream_rng(&[seed, 0]);
    let (first_mover, opening) = opening_roll(&mut dice);
    let session = Session {
        id: id.clone(),
        seed,
        board: Board::initial(),
        to_move: first_mover,
        first_mover,
        opening: Some(opening),
        pending_roll: None,
        history: Vec::new(),
        engine_side: request.engine_side.unwrap_or(Player::Red),
        engine_kind: request.engine_kind.unwrap_or_default(),
        rollout,
        dice,
    };
    session.check_replay()?;
    let view = session.view();
    state.sessions.write().expect("session table lock").insert(
        id.clone(),
        Arc::new(SessionCell {
            writer: tokio::sync::Mutex::new(()),
            state: RwLock::new(session),
        }),
    );
    log::info!("created session {id} (engine {:?} as {})", view.engine_kind, view.engine_side);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_game(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(state.cell(&id)?.snapshot().view()))
}

#[derive(Serialize)]
pub struct RollResponse {
    pub roll: DiceRoll,
    pub session: SessionView,
}

async fn roll(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<RollResponse> {
    let cell = state.cell(&id)?;
    let _guard = cell.writer.lock().await;
    let mut session = cell.snapshot();
    let roll = session.roll()?;
    let session = cell.store(session)?;
    Ok(Json(RollResponse { roll, session }))
}

#[derive(Serialize)]
pub struct LegalPlay {
    pub notation: String,
    pub after: Board,
}

#[derive(Serialize)]
pub struct LegalResponse {
    pub to_move: Player,
    pub roll: DiceRoll,
    pub plays: Vec<LegalPlay>,
}

async fn legal(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<LegalResponse> {
    let session = state.cell(&id)?.snapshot();
    if session.result().is_some() {
        return Err(ApiError::conflict("game is finished"));
    }
    let roll = session
        .pending_roll
        .ok_or_else(|| ApiError::conflict("no dice rolled yet"))?;
    let plays = legal_plays(&session.board, session.to_move, roll).map_err(ApiError::illegal)?;
    Ok(Json(LegalResponse {
        to_move: session.to_move,
        roll,
        plays: plays
            .into_iter()
            .map(|p| LegalPlay {
                notation: p.notation(session.to_move),
                after: p.after,
            })
            .collect(),
    }))
}

#[derive(Deserialize)]
pub struct PlayRequest {
    pub play_notation: String,
}

async fn play(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(request): Json<PlayRequest>,
) -> ApiResult<SessionView> {
    let cell = state.cell(&id)?;
    let _guard = cell.writer.lock().await;
    let mut session = cell.snapshot();
    match session.status() {
        Status::Finished => return Err(ApiError::conflict("game is finished")),
        Status::AwaitingEngine => return Err(ApiError::conflict("it is the engine's turn")),
        Status::AwaitingHuman => {}
    }
    let roll = session
        .pending_roll
        .ok_or_else(|| ApiError::conflict("roll the dice before playing"))?;
    let specs = parse_notation(&request.play_notation).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let chosen = resolve_play(&session.board, session.to_move, roll, &specs).map_err(ApiError::illegal)?;
    session.commit(chosen);
    Ok(Json(cell.store(session)?))
}

#[derive(Serialize)]
pub struct EngineMoveResponse {
    pub roll: DiceRoll,
    pub play: String,
    pub after: Board,
    /// Full candidate report when the engine rolls out.
    pub analysis: Option<AnalysisReport>,
    pub session: SessionView,
}

async fn engine_move(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<EngineMoveResponse> {
    let model = state.model()?;
    let cell = state.cell(&id)?;
    let _guard = cell.writer.lock().await;
    let mut session = cell.snapshot();
    match session.status() {
        Status::Finished => return Err(ApiError::conflict("game is finished")),
        Status::AwaitingHuman => return Err(ApiError::conflict("it is the human's turn")),
        Status::AwaitingEngine => {}
    }
    if session.pending_roll.is_none() {
        session.roll()?;
    }
    let roll = session.pending_roll.expect("rolled above");
    let (board, player, kind) = (session.board, session.to_move, session.engine_kind);
    let ply = session.history.len() as u32;
    let rollout = RolloutStrategy::new(model.clone(), session.rollout.clone())
        .map_err(|e| ApiError::unprocessable(e.to_string()))?
        .decision_config(session.seed, ply);
    let (play, analysis) = tokio::task::spawn_blocking(move || match kind {
        EngineKind::Greedy => Ok((greedy_play(&model, &board, player, roll), None)),
        EngineKind::Rollout => {
            let decision = rollout_decide(&model, &board, player, roll, &rollout)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let report = AnalysisReport::new(&board, player, roll, &rollout, &decision);
            Ok((decision.play, Some(report)))
        }
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    let notation = play.notation(player);
    session.commit(play.clone());
    log::debug!("session {id}: engine played {roll} {notation}");
    Ok(Json(EngineMoveResponse {
        roll,
        play: notation,
        after: play.after,
        analysis,
        session: cell.store(session)?,
    }))
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum RollInput {
    Pair([u8; 2]),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub board_text: String,
    pub to_move: String,
    pub roll: RollInput,
    #[serde(default)]
    pub config: RolloutOverrides,
}

async fn analyze_position(
    State(state): State<AppState>,
    Json(request): Json<AnalyzeRequest>,
) -> ApiResult<AnalysisReport> {
    let model = state.model()?;
    let board = Board::from_text(&request.board_text).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    if board.terminal().is_some() {
        return Err(ApiError::unprocessable("position is already finished"));
    }
    let player: Player = request
        .to_move
        .parse()
        .map_err(|_| ApiError::unprocessable(format!("unknown player `{}`", request.to_move)))?;
    let roll = match request.roll {
        RollInput::Pair([a, b]) => DiceRoll::new(a, b).map_err(|e| ApiError::unprocessable(e.to_string())),
        RollInput::Text(t) => t.parse::<DiceRoll>().map_err(|e| ApiError::unprocessable(e.to_string())),
    }?;
    let config = request.config.apply(state.default_rollout.clone())?;
    let report = tokio::task::spawn_blocking(move || analyze(&model, &board, player, roll, &config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    Ok(Json(report))
}
