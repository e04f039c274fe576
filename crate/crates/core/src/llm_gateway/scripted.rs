use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use super::{request_fingerprint, Completion, CompletionSource, GatewayError, LanguageModel, PromptRequest};

type Responder = Box<dyn Fn(&PromptRequest) -> Option<String> + Send + Sync>;

enum Script {
    Ordered(VecDeque<String>),
    Keyed(HashMap<String, String>),
    Responder(Responder),
}

/// Canned replies for tests and offline runs. Every request it sees is
/// kept so tests can count and inspect calls.
pub struct ScriptedModel {
    script: Mutex<Script>,
    calls: Mutex<Vec<PromptRequest>>,
}

impl ScriptedModel {
    fn with(script: Script) -> Self {
        ScriptedModel {
            script: Mutex::new(script),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Replies handed out in order, one per call.
    pub fn ordered<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with(Script::Ordered(replies.into_iter().map(Into::into).collect()))
    }

    /// Replies keyed by request fingerprint.
    pub fn keyed(replies: HashMap<String, String>) -> Self {
        Self::with(Script::Keyed(replies))
    }

    /// Replies computed from the request; `None` means no reply.
    pub fn responder(f: impl Fn(&PromptRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        Self::with(Script::Responder(Box::new(f)))
    }

    pub fn calls(&self) -> Vec<PromptRequest> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl LanguageModel for ScriptedModel {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).push(request.clone());
        let fingerprint = request_fingerprint(request);
        let reply = match &mut *self.script.lock().unwrap_or_else(|e| e.into_inner()) {
            Script::Ordered(queue) => queue.pop_front(),
            Script::Keyed(map) => map.get(&fingerprint).cloned(),
            Script::Responder(f) => f(request),
        };
        let text = reply.ok_or(GatewayError::ScriptExhausted(fingerprint))?;
        Ok(Completion {
            text,
            usage: None,
            source: CompletionSource::Scripted,
        })
    }
}
