//! Adapter slot for streaming speech input. The engine itself consumes
//! text; a recognizer front end finalizes utterances after a silence window.

use std::time::Duration;

/// Anything that yields finished human utterances.
pub trait UtteranceSource {
    /// The next utterance, or `None` when the source is exhausted.
    fn next_utterance(&mut self) -> Option<String>;
}

impl<I: Iterator<Item = String>> UtteranceSource for I {
    fn next_utterance(&mut self) -> Option<String> {
        self.next()
    }
}

/// Joins partial transcripts and releases them as one utterance once no new
/// partial has arrived for `window`.
#[derive(Debug, Clone)]
pub struct SilenceSegmenter {
    window_ms: u64,
    pending: Vec<String>,
    last_partial_ms: Option<u64>,
}

impl SilenceSegmenter {
    pub fn new(window: Duration) -> Self {
        Self {
            window_ms: window.as_millis() as u64,
            pending: Vec::new(),
            last_partial_ms: None,
        }
    }

    pub fn push_partial(&mut self, text: &str, at_ms: u64) {
        let text = text.trim();
        if !text.is_empty() {
            self.pending.push(text.to_string());
            self.last_partial_ms = Some(at_ms);
        }
    }

    /// Returns the finished utterance if the silence window has elapsed.
    pub fn poll(&mut self, now_ms: u64) -> Option<String> {
        let last = self.last_partial_ms?;
        if now_ms.saturating_sub(last) < self.window_ms {
            return None;
        }
        self.last_partial_ms = None;
        Some(std::mem::take(&mut self.pending).join(" "))
    }
}
