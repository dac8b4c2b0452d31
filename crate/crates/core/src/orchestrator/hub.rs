use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use serde::{Deserialize, Serialize};

use super::session::{Engine, Session, SessionConfig, SessionError, SessionState};
use super::transcript::TurnRecord;
use crate::behavior::BehaviorScript;

/// Read-only projection of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub turn_count: usize,
    pub turn_limit: usize,
    pub last_script: Option<BehaviorScript>,
}

/// Per-session overrides applied on top of the hub defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    pub id: Option<String>,
    pub seed: Option<u64>,
    pub turn_limit: Option<usize>,
}

struct Snapshot {
    view: SessionView,
    records: Vec<TurnRecord>,
}

impl Snapshot {
    fn of(session: &Session) -> Self {
        Self {
            view: SessionView {
                id: session.id().to_string(),
                state: session.state(),
                turn_count: session.turns().len(),
                turn_limit: session.config().turn_limit,
                last_script: session.turns().last().map(|t| t.script.clone()),
            },
            records: super::transcript::transcript_records(session),
        }
    }
}

struct Slot {
    session: Mutex<Session>,
    // readable while a step holds `session`
    snapshot: RwLock<Snapshot>,
}

/// Many concurrent sessions; steps on one session are serialized and a
/// second concurrent step is rejected with `SessionBusy`.
pub struct SessionHub {
    engine: Engine,
    defaults: SessionConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl SessionHub {
    pub fn new(engine: Engine, defaults: SessionConfig) -> Self {
        Self {
            engine,
            defaults,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn defaults(&self) -> &SessionConfig {
        &self.defaults
    }

    pub fn create(&self, options: SessionOptions) -> Result<SessionView, SessionError> {
        let mut config = self.defaults.clone();
        if let Some(seed) = options.seed {
            config.seed = seed;
        }
        if let Some(limit) = options.turn_limit {
            config.turn_limit = limit;
        }
        let session = match options.id {
            Some(id) => self.engine.create_session_with_id(id, config)?,
            None => self.engine.create_session(config)?,
        };
        let snapshot = Snapshot::of(&session);
        let view = snapshot.view.clone();
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if sessions.contains_key(session.id()) {
            return Err(SessionError::Config(format!(
                "session id {} already exists",
                session.id()
            )));
        }
        sessions.insert(
            session.id().to_string(),
            Arc::new(Slot {
                session: Mutex::new(session),
                snapshot: RwLock::new(snapshot),
            }),
        );
        Ok(view)
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, SessionError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    /// Runs one exchange on session `id`. Blocks for the LLM call.
    pub fn step(&self, id: &str, human_text: &str) -> Result<TurnRecord, SessionError> {
        self.with_session(id, |engine, session| {
            engine.step(session, human_text)?;
            let turn = session.turns().last().expect("step recorded a turn");
            Ok(TurnRecord::from_turn(session.id(), turn))
        })
    }

    pub fn close(&self, id: &str) -> Result<SessionView, SessionError> {
        self.with_session(id, |_, session| {
            session.close();
            Ok(())
        })?;
        self.view(id)
    }

    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&Engine, &mut Session) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let slot = self.slot(id)?;
        let mut session = match slot.session.try_lock() {
            Ok(guard) => guard,
            Err(TryLockError::WouldBlock) => return Err(SessionError::SessionBusy),
            Err(TryLockError::Poisoned(e)) => e.into_inner(),
        };
        let result = f(&self.engine, &mut session);
        *slot.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Snapshot::of(&session);
        result
    }

    pub fn view(&self, id: &str) -> Result<SessionView, SessionError> {
        Ok(self
            .slot(id)?
            .snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .view
            .clone())
    }

    /// Records for completed turns only; never waits for an in-flight step.
    pub fn transcript(&self, id: &str) -> Result<Vec<TurnRecord>, SessionError> {
        Ok(self
            .slot(id)?
            .snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .records
            .clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::{EmotionLabel, FixedClassifier};
    use crate::orchestrator::llm::{CompletionRequest, LlmBackend, LlmClient, LlmError, ScriptedLlm};
    use std::sync::mpsc;
    use std::time::Duration;

    fn hub(backend: Arc<dyn LlmBackend>) -> SessionHub {
        let engine = Engine::new(
            Arc::new(FixedClassifier::new(EmotionLabel::Joy, 0.9)),
            LlmClient::new(backend),
        );
        SessionHub::new(engine, SessionConfig::default())
    }

    /// Blocks each call until released, to hold a step in flight.
    struct Gate {
        entered: Mutex<mpsc::Sender<()>>,
        release: Mutex<mpsc::Receiver<()>>,
    }

    impl LlmBackend for Gate {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, LlmError> {
            self.entered.lock().unwrap().send(()).unwrap();
            self.release
                .lock()
                .unwrap()
                .recv_timeout(Duration::from_secs(10))
                .unwrap();
            Ok("Hi! 😊".into())
        }
    }

    #[test]
    fn create_step_view() {
        let h = hub(Arc::new(ScriptedLlm::new(["Hello! 😊"])));
        let view = h.create(SessionOptions::default()).unwrap();
        assert_eq!(
            (view.turn_count, view.turn_limit, view.state),
            (0, 11, SessionState::Open)
        );
        let record = h.step(&view.id, "hi").unwrap();
        assert_eq!(record.index, 1);
        let view = h.view(&view.id).unwrap();
        assert_eq!(view.turn_count, 1);
        assert_eq!(view.last_script, Some(record.script.clone()));
        assert_eq!(h.transcript(&view.id).unwrap(), vec![record]);
    }

    #[test]
    fn errors_by_code() {
        let h = hub(Arc::new(ScriptedLlm::new(["a. 😊", "b. 🙂"])));
        assert_eq!(h.step("nope", "hi").unwrap_err().code(), "SessionNotFound");
        let v = h
            .create(SessionOptions {
                turn_limit: Some(2),
                ..SessionOptions::default()
            })
            .unwrap();
        h.step(&v.id, "one").unwrap();
        h.step(&v.id, "two").unwrap();
        assert_eq!(h.step(&v.id, "three").unwrap_err().code(), "SessionClosed");
        let dup = SessionOptions {
            id: Some(v.id.clone()),
            ..SessionOptions::default()
        };
        assert_eq!(h.create(dup).unwrap_err().code(), "ConfigError");
    }

    #[test]
    fn concurrent_step_on_same_session_is_busy() {
        let (entered_tx, entered_rx) = mpsc::channel();
        let (release_tx, release_rx) = mpsc::channel();
        let gate = Gate {
            entered: Mutex::new(entered_tx),
            release: Mutex::new(release_rx),
        };
        let h = Arc::new(hub(Arc::new(gate)));
        let id = h.create(SessionOptions::default()).unwrap().id;
        let other = h.create(SessionOptions::default()).unwrap().id;

        let worker = {
            let h = h.clone();
            let id = id.clone();
            std::thread::spawn(move || h.step(&id, "first"))
        };
        entered_rx.recv_timeout(Duration::from_secs(10)).unwrap();
        assert_eq!(h.step(&id, "second").unwrap_err(), SessionError::SessionBusy);
        // completed-turn reads do not wait on the in-flight step
        assert!(h.transcript(&id).unwrap().is_empty());
        assert_eq!(h.view(&other).unwrap().turn_count, 0);
        release_tx.send(()).unwrap();
        assert_eq!(worker.join().unwrap().unwrap().index, 1);
        assert_eq!(h.transcript(&id).unwrap().len(), 1);
    }

    #[test]
    fn close_is_terminal() {
        let h = hub(Arc::new(ScriptedLlm::new(["x. 😊"])));
        let id = h.create(SessionOptions::default()).unwrap().id;
        assert_eq!(h.close(&id).unwrap().state, SessionState::Closed);
        assert_eq!(h.step(&id, "hi").unwrap_err(), SessionError::SessionClosed);
    }
}
