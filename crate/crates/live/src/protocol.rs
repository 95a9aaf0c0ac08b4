//! Wire messages. Every message is a JSON object tagged by `type`; unknown
//! fields are ignored so clients and servers can evolve independently.

use owah::episode::{EpisodeOutcome, EpisodeRecord, HelperInfo};
use owah::goals::GoalSpec;
use owah::worldsim::{Action, Outcome, SceneDoc};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// JSON Schema for every server message.
pub const SERVER_SCHEMA: &str = include_str!("../schema/server.schema.json");
/// JSON Schema for every client message.
pub const CLIENT_SCHEMA: &str = include_str!("../schema/client.schema.json");

/// Placeholder for the helper name in blinded transcripts.
pub const HIDDEN_HELPER: &str = "hidden";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Dataset episode id, e.g. `test-0003`.
    pub episode: String,
    #[serde(default = "default_helper")]
    pub helper: String,
    /// Helper seed; replaying the same human actions with the same seed
    /// reproduces the episode.
    #[serde(default)]
    pub seed: u64,
    /// Include helper identity and diagnostics in replies.
    #[serde(default)]
    pub debug: bool,
}

fn default_helper() -> String {
    "none".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Create { config: SessionConfig },
    /// Bind the connection to an existing session, e.g. after a reconnect.
    Attach { session: String },
    Act { action: Action },
    Snapshot,
    Transcript,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingHuman,
    Stepping,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub session: String,
    pub tick: u32,
    pub status: SessionStatus,
    pub state: SceneDoc,
    pub state_hash: String,
    /// Empty once the session is done.
    pub legal_actions: Vec<Action>,
    /// The human's task; never given to the helper.
    pub goal: GoalSpec,
    /// Steps the planner needed alone on this episode.
    pub solo_length: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<EpisodeOutcome>,
}

/// Helper internals, sent only to debug-mode sessions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelperDiagnostics {
    pub helper: String,
    pub particle_count: usize,
    pub particles: Vec<GoalSpec>,
    pub resampled: bool,
    pub chosen_subgoal: Option<String>,
    pub value: Option<f64>,
}

impl HelperDiagnostics {
    pub fn new(helper: &str, info: &HelperInfo) -> Self {
        HelperDiagnostics {
            helper: helper.to_string(),
            particle_count: info.particles.len(),
            particles: info.particles.iter().map(|p| p.goal.clone()).collect(),
            resampled: info.resampled,
            chosen_subgoal: info.chosen_subgoal.clone(),
            value: info.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickReply {
    pub version: u32,
    pub session: String,
    /// Index of the executed tick.
    pub tick: u32,
    pub main_action: Action,
    pub helper_action: Action,
    pub outcomes: [Outcome; 2],
    pub snapshot: Snapshot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub helper_info: Option<HelperDiagnostics>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadMessage,
    InvalidConfig,
    NotFound,
    NoSession,
    IllegalAction,
    SessionFinished,
    Busy,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub version: u32,
    pub code: ErrorCode,
    pub message: String,
    /// Legal main-agent actions, sent with `illegal_action`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_actions: Option<Vec<Action>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Result(Box<TickReply>),
    Transcript { version: u32, session: String, record: Box<EpisodeRecord> },
    Error(ErrorReply),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Decodes a client message, mapping failures to a `bad_message` reply.
pub fn decode_client(text: &str) -> Result<ClientMessage, ErrorReply> {
    serde_json::from_str(text).map_err(|e| ErrorReply {
        version: PROTOCOL_VERSION,
        code: ErrorCode::BadMessage,
        message: e.to_string(),
        legal_actions: None,
    })
}

/// Strips helper identity and internals from a record.
pub fn blind(record: &EpisodeRecord) -> EpisodeRecord {
    let mut r = record.clone();
    r.header.helper = HIDDEN_HELPER.into();
    for t in &mut r.ticks {
        t.particles.clear();
        t.chosen_subgoal = None;
        t.value = None;
        t.f1 = None;
    }
    r
}
