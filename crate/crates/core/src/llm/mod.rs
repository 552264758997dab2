//! Chat providers, prompt templates and response parsers.

pub mod parse;
pub mod provider;
pub mod templates;

pub use parse::{
    parse_action_decision, parse_coreference, parse_event_extraction, parse_node_selection,
    parse_refined_query, parse_relation_extraction, parse_response, parse_subgoals, Action,
    ActionKind, CoreferenceVerdict, ParseError, Parsed, RawEvent, RawRelation, RefinedQuery,
};
pub use provider::{
    ChatProvider, ChatRequest, ChatResponse, LlmError, OpenAiChatProvider, ReplayProvider,
    ReplayRecord, TokenUsage,
};
pub use templates::{
    bindings, render_prompt, render_prompt_with, replay_key, Bindings, RenderError,
    RenderedPrompt, TemplateId,
};

use crate::config::{Config, EmptyBindingPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{template} response: {source}")]
    Parse {
        template: TemplateId,
        #[source]
        source: ParseError,
    },
}

/// Renders templates, calls a provider and parses replies with the
/// configured sampling parameters.
#[derive(Clone, Copy)]
pub struct Gateway<'a> {
    provider: &'a dyn ChatProvider,
    temperature: f64,
    max_tokens: u32,
    empty_binding: EmptyBindingPolicy,
}

impl<'a> Gateway<'a> {
    pub fn new(provider: &'a dyn ChatProvider, config: &Config) -> Self {
        Self {
            provider,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            empty_binding: config.empty_binding,
        }
    }

    pub fn provider(&self) -> &'a dyn ChatProvider {
        self.provider
    }

    /// One round trip; returns the raw completion text.
    pub fn complete(&self, template: TemplateId, bindings: &Bindings) -> Result<String, GatewayError> {
        let prompt = RenderedPrompt::new(template, bindings, self.empty_binding)?;
        let request = ChatRequest {
            system: String::new(),
            user: prompt.text,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            replay_key: Some(prompt.replay_key),
        };
        Ok(self.provider.chat(&request)?.text)
    }

    /// Calls and parses, retrying once on a transport or parse failure.
    /// Render errors and scripted misses are not retried.
    pub fn call<T>(
        &self,
        template: TemplateId,
        bindings: &Bindings,
        parse: impl Fn(&str) -> Result<Parsed<T>, ParseError>,
    ) -> Result<Parsed<T>, GatewayError> {
        let attempt = || -> Result<Parsed<T>, GatewayError> {
            let text = self.complete(template, bindings)?;
            parse(&text).map_err(|source| GatewayError::Parse { template, source })
        };
        match attempt() {
            Err(GatewayError::Llm(LlmError::Transport { status, message })) => {
                tracing::warn!(%template, ?status, %message, "transport failure, retrying once");
                attempt()
            }
            Err(GatewayError::Parse { source, .. }) => {
                tracing::warn!(%template, error = %source, "unparseable reply, retrying once");
                attempt()
            }
            other => other,
        }
        .inspect(|parsed| {
            for w in &parsed.warnings {
                tracing::debug!(%template, warning = %w, "repaired reply");
            }
        })
    }
}
