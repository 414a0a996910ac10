//! Talking to chat-completion models: a retrying HTTP client and a
//! deterministic in-process mock for offline runs.

pub mod client;
pub mod mock;

pub use client::{ChatClient, ChatMessage, ChatRequest, Completion, LlmError, RetryPolicy, Role};
pub use mock::{MockMode, MockPolicy, mock_complete};
