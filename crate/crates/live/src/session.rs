//! Session store and the per-session turn logic.
//!
//! Each session owns one joint episode. Only one action can be in flight per
//! session: a submission that arrives while another is stepping is rejected
//! as busy. Snapshot reads come from a published copy that is replaced after
//! every tick, so they never wait on a step.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, TryLockError};

use owah::baselines::{build_helper, HelperKind, HelperResources, HelperSpec};
use owah::bench::{Dataset, EpisodeData};
use owah::episode::{Episode, EpisodeError, EpisodeRecord, EpisodeSpec, EpisodeStatus, T_MAX};
use owah::worldsim::Action;

use crate::protocol::{
    blind, ErrorCode, ErrorReply, HelperDiagnostics, SessionConfig, SessionStatus, Snapshot, TickReply,
    PROTOCOL_VERSION,
};

/// Helpers offered for human play: solo and the three compared helpers.
pub const HUMAN_HELPERS: [HelperKind; 4] = [HelperKind::None, HelperKind::Nopa, HelperKind::HpGpn, HelperKind::HpRg];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LiveError {
    #[error("unknown episode {0}")]
    UnknownEpisode(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no session attached; send create or attach first")]
    NoSession,
    #[error("illegal action {action}")]
    IllegalAction { action: Action, legal: Vec<Action> },
    #[error("session finished")]
    Finished,
    #[error("an action is already being processed")]
    Busy,
    #[error("episode failed: {0}")]
    Episode(String),
}

impl LiveError {
    pub fn code(&self) -> ErrorCode {
        match self {
            LiveError::UnknownEpisode(_) | LiveError::UnknownSession(_) => ErrorCode::NotFound,
            LiveError::InvalidConfig(_) => ErrorCode::InvalidConfig,
            LiveError::NoSession => ErrorCode::NoSession,
            LiveError::IllegalAction { .. } => ErrorCode::IllegalAction,
            LiveError::Finished => ErrorCode::SessionFinished,
            LiveError::Busy => ErrorCode::Busy,
            LiveError::Episode(_) => ErrorCode::Internal,
        }
    }

    pub fn reply(&self) -> ErrorReply {
        ErrorReply {
            version: PROTOCOL_VERSION,
            code: self.code(),
            message: self.to_string(),
            legal_actions: match self {
                LiveError::IllegalAction { legal, .. } => Some(legal.clone()),
                _ => None,
            },
        }
    }
}

impl From<EpisodeError> for LiveError {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::IllegalAction { action, legal } => LiveError::IllegalAction { action, legal },
            EpisodeError::Finished => LiveError::Finished,
            other => LiveError::Episode(other.to_string()),
        }
    }
}

struct Session {
    id: String,
    helper: String,
    debug: bool,
    solo_length: u32,
    episode: Mutex<Episode>,
    published: Mutex<Snapshot>,
}

fn snapshot_of(id: &str, solo_length: u32, ep: &Episode) -> Snapshot {
    let done = ep.status() == EpisodeStatus::Done;
    Snapshot {
        version: PROTOCOL_VERSION,
        session: id.to_string(),
        tick: ep.tick(),
        status: if done { SessionStatus::Done } else { SessionStatus::AwaitingHuman },
        state: ep.state().to_doc(),
        state_hash: ep.state().state_hash(),
        legal_actions: if done { Vec::new() } else { ep.legal_main_actions() },
        goal: ep.goal().clone(),
        solo_length,
        outcome: ep.record().outcome.clone(),
    }
}

impl Session {
    fn snapshot_of(&self, ep: &Episode) -> Snapshot {
        snapshot_of(&self.id, self.solo_length, ep)
    }

    fn published(&self) -> Snapshot {
        self.published.lock().expect("snapshot lock").clone()
    }

    fn publish(&self, s: Snapshot) {
        *self.published.lock().expect("snapshot lock") = s;
    }
}

/// Episode catalogue, helper resources and live sessions.
pub struct LiveService {
    catalog: BTreeMap<String, Arc<EpisodeData>>,
    resources: HelperResources,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl LiveService {
    pub fn new(datasets: impl IntoIterator<Item = Dataset>, resources: HelperResources) -> Self {
        let catalog = datasets
            .into_iter()
            .flat_map(|d| d.episodes)
            .map(|e| (e.entry.id.clone(), Arc::new(e)))
            .collect();
        LiveService { catalog, resources, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }

    pub fn episode_ids(&self) -> impl Iterator<Item = &str> {
        self.catalog.keys().map(String::as_str)
    }

    /// Starts a session on a catalogued episode.
    pub fn create(&self, config: &SessionConfig) -> Result<Snapshot, LiveError> {
        let data = self.catalog.get(&config.episode).ok_or_else(|| LiveError::UnknownEpisode(config.episode.clone()))?;
        let s0 = data.initial_state().map_err(|e| LiveError::Episode(e.to_string()))?;
        let spec = EpisodeSpec {
            episode: data.entry.id.clone(),
            template: data.entry.template,
            seed: config.seed,
            goal: data.goal.clone(),
            s0,
        };
        self.create_from(spec, data.l_m, config)
    }

    /// Starts a session on an explicit apartment and goal.
    pub fn create_from(&self, spec: EpisodeSpec, solo_length: u32, config: &SessionConfig) -> Result<Snapshot, LiveError> {
        let helper_spec: HelperSpec = config.helper.parse().map_err(|e| LiveError::InvalidConfig(format!("{e}")))?;
        if !HUMAN_HELPERS.contains(&helper_spec.kind) || helper_spec.ablations != Default::default() {
            let offered: Vec<_> = HUMAN_HELPERS.iter().map(|k| k.name()).collect();
            return Err(LiveError::InvalidConfig(format!(
                "helper {} is not offered for human play; choose one of {}",
                config.helper,
                offered.join(", ")
            )));
        }
        let helper = build_helper(&helper_spec, &spec.s0, &spec.goal, config.seed, &self.resources)
            .map_err(|e| LiveError::InvalidConfig(e.to_string()))?;
        let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let episode = Episode::new(spec, &helper_spec.to_string(), helper, T_MAX);
        let snap = snapshot_of(&id, solo_length, &episode);
        let session = Session {
            id: id.clone(),
            helper: helper_spec.to_string(),
            debug: config.debug,
            solo_length,
            episode: Mutex::new(episode),
            published: Mutex::new(snap.clone()),
        };
        self.sessions.lock().expect("session table").insert(id, Arc::new(session));
        Ok(snap)
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, LiveError> {
        self.sessions.lock().expect("session table").get(id).cloned().ok_or_else(|| LiveError::UnknownSession(id.into()))
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, LiveError> {
        Ok(self.session(id)?.published())
    }

    /// Runs one tick with the human's action.
    pub fn submit(&self, id: &str, action: Action) -> Result<TickReply, LiveError> {
        let session = self.session(id)?;
        let mut ep = match session.episode.try_lock() {
            Ok(ep) => ep,
            Err(TryLockError::WouldBlock) => return Err(LiveError::Busy),
            Err(TryLockError::Poisoned(_)) => return Err(LiveError::Episode("session poisoned".into())),
        };
        if ep.status() == EpisodeStatus::Done {
            return Err(LiveError::Finished);
        }
        let mut pending = session.published();
        pending.status = SessionStatus::Stepping;
        session.publish(pending);
        let result = ep.step(action);
        let snapshot = session.snapshot_of(&ep);
        session.publish(snapshot.clone());
        let r = result?;
        Ok(TickReply {
            version: PROTOCOL_VERSION,
            session: session.id.clone(),
            tick: r.record.t,
            main_action: r.record.a_m,
            helper_action: r.record.a_h,
            outcomes: r.record.outcomes,
            snapshot,
            helper_info: session.debug.then(|| HelperDiagnostics::new(&session.helper, &r.info)),
        })
    }

    /// The record so far; blinded unless the session is in debug mode.
    pub fn transcript(&self, id: &str) -> Result<EpisodeRecord, LiveError> {
        let session = self.session(id)?;
        let ep = session.episode.lock().expect("episode lock");
        Ok(if session.debug { ep.record().clone() } else { blind(ep.record()) })
    }

    /// The unblinded record, for experimenters.
    pub fn full_transcript(&self, id: &str) -> Result<EpisodeRecord, LiveError> {
        let session = self.session(id)?;
        let ep = session.episode.lock().expect("episode lock");
        Ok(ep.record().clone())
    }
}
