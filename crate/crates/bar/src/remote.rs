//! HTTP client for a hosted language model, and the decomposer, scorer and
//! completer built on it.
//!
//! Requests are `POST {"prompt": ..., "temperature": ...}` or, in chat form,
//! `POST {"messages": [{"role", "content"}], "temperature": ...}`; replies are
//! `{"text": ...}`.

use std::time::Duration;

use bar_core::consistency::{ConsistencyError, ForwardCompleter, StepRating, StepScorer};
use bar_core::decompose::{validate_hint, DecomposeError, Decomposer, DecompositionResult};
use bar_core::prompt::{self, Prompt};
use bar_core::{Goal, Plan, RecipeDb, Step, WorldState};
use serde::{Deserialize, Serialize};

pub const API_KEY_ENV: &str = "BAR_REMOTE_API_KEY";

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub temperature: f64,
    /// Send `messages` instead of a flattened `prompt`.
    pub chat: bool,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            retries: 1,
            temperature: 0.0,
            chat: false,
        }
    }

    /// Picks the bearer token up from `BAR_REMOTE_API_KEY`.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("remote unavailable: {0}")]
    Unavailable(String),
    #[error("unexpected remote reply: {0}")]
    Parse(String),
}

#[derive(Serialize)]
#[serde(untagged)]
enum Request<'a> {
    Flat {
        prompt: String,
        temperature: f64,
    },
    Chat {
        messages: Vec<Message<'a>>,
        temperature: f64,
    },
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

/// Blocking client; one instance per worker.
#[derive(Clone, Debug)]
pub struct RemoteClient {
    agent: ureq::Agent,
    config: RemoteConfig,
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        RemoteClient { agent, config }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Sends `prompt` and returns the reply text.
    pub fn complete(&self, prompt: &Prompt) -> Result<String, RemoteError> {
        let body = if self.config.chat {
            Request::Chat {
                messages: prompt
                    .messages()
                    .iter()
                    .map(|(role, content)| Message {
                        role: role.as_str(),
                        content,
                    })
                    .collect(),
                temperature: self.config.temperature,
            }
        } else {
            Request::Flat {
                prompt: prompt.flat(),
                temperature: self.config.temperature,
            }
        };
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                log::warn!(
                    "retrying {} after: {}",
                    self.config.endpoint,
                    last.as_ref().unwrap()
                );
            }
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(e @ RemoteError::Parse(_)) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn send(&self, body: &Request<'_>) -> Result<String, RemoteError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| RemoteError::Unavailable(e.to_string()))?;
        let reply: Reply = response
            .body_mut()
            .read_json()
            .map_err(|e| RemoteError::Parse(e.to_string()))?;
        Ok(reply.text)
    }
}

fn exemplar_refs(exemplars: &[String]) -> Vec<&str> {
    exemplars.iter().map(String::as_str).collect()
}

/// Decomposer backed by a remote model.
pub struct RemoteDecomposer<'a> {
    client: RemoteClient,
    db: &'a RecipeDb,
    exemplars: Vec<String>,
}

impl<'a> RemoteDecomposer<'a> {
    /// Uses the bundled few-shot exemplar.
    pub fn new(client: RemoteClient, db: &'a RecipeDb) -> Self {
        RemoteDecomposer {
            client,
            db,
            exemplars: vec![prompt::DECOMPOSE_EXEMPLAR.to_string()],
        }
    }

    pub fn with_exemplars(mut self, exemplars: Vec<String>) -> Self {
        self.exemplars = exemplars;
        self
    }
}

impl Decomposer for RemoteDecomposer<'_> {
    fn decompose(
        &self,
        goal: &Goal,
        hint: Option<&DecompositionResult>,
    ) -> Result<DecompositionResult, DecomposeError> {
        if let Some(hint) = hint {
            match validate_hint(self.db, goal, hint) {
                Ok(()) => return Ok(hint.clone()),
                Err(why) => log::warn!("ignoring memory hint for {goal}: {why}"),
            }
        }
        let prompt = prompt::format_decompose_prompt(goal, &exemplar_refs(&self.exemplars));
        let text = self.client.complete(&prompt).map_err(|e| match e {
            RemoteError::Unavailable(m) => DecomposeError::RemoteUnavailable(m),
            RemoteError::Parse(m) => DecomposeError::RemoteParseError(m),
        })?;
        prompt::parse_decompose_response(&text, self.db)
            .map_err(|e| DecomposeError::RemoteParseError(e.reason))
    }
}

fn consistency_error(e: RemoteError) -> ConsistencyError {
    match e {
        RemoteError::Unavailable(m) => ConsistencyError::RemoteUnavailable(m),
        RemoteError::Parse(m) => ConsistencyError::RemoteParseError(m),
    }
}

/// Step scorer backed by a remote model.
pub struct RemoteScorer {
    client: RemoteClient,
    exemplars: Vec<String>,
}

impl RemoteScorer {
    pub fn new(client: RemoteClient) -> Self {
        RemoteScorer {
            client,
            exemplars: vec![prompt::RATING_EXEMPLAR.to_string()],
        }
    }
}

impl StepScorer for RemoteScorer {
    fn score(
        &self,
        goal: &Goal,
        plan: &Plan,
        _initial: &WorldState,
    ) -> Result<Vec<StepRating>, ConsistencyError> {
        let prompt = prompt::format_rating_prompt(goal, plan, &exemplar_refs(&self.exemplars));
        let text = self.client.complete(&prompt).map_err(consistency_error)?;
        prompt::parse_rating_response(&text)
            .map_err(|e| ConsistencyError::RemoteParseError(e.reason))
    }
}

/// Forward completer backed by a remote model.
pub struct RemoteCompleter<'a> {
    client: RemoteClient,
    db: &'a RecipeDb,
    exemplars: Vec<String>,
}

impl<'a> RemoteCompleter<'a> {
    pub fn new(client: RemoteClient, db: &'a RecipeDb) -> Self {
        RemoteCompleter {
            client,
            db,
            exemplars: vec![prompt::COMPLETION_EXEMPLAR.to_string()],
        }
    }
}

impl ForwardCompleter for RemoteCompleter<'_> {
    fn complete(
        &self,
        goal: &Goal,
        start: &Step,
        end: &Step,
        _state_at_start: &WorldState,
    ) -> Result<Plan, ConsistencyError> {
        let prompt =
            prompt::format_completion_prompt(goal, start, end, &exemplar_refs(&self.exemplars));
        let text = self.client.complete(&prompt).map_err(consistency_error)?;
        prompt::parse_partial_plan(&text, self.db)
            .map_err(|e| ConsistencyError::RemoteParseError(e.reason))
    }
}
