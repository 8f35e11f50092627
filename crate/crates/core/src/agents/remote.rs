//! Chat-completions adapter. Prompts are rendered from text templates and
//! replies are parsed as JSON, with one retry when a reply cannot be parsed.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::corpus::{packaged_corpus, FewShotExample};
use super::{
    describe_layout, describe_scene, AgentBackend, AgentContext, AgentError, AmbiguityOutcome,
    CandidateLayout, Facet, ValidationChoice,
};
use crate::config::{parse_spec, validate_spec, OptimizationSpec};

pub const AMBIGUITY_TEMPLATE: &str = include_str!("../../assets/prompts/ambiguity.txt");
pub const CONFIGURATION_TEMPLATE: &str = include_str!("../../assets/prompts/configuration.txt");
pub const VALIDATION_TEMPLATE: &str = include_str!("../../assets/prompts/validation.txt");

const DEFAULT_TIMEOUT_S: f64 = 60.0;
const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, PartialEq)]
pub struct ClientSettings {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl ClientSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: DEFAULT_MODEL.to_owned(),
            timeout: Duration::from_secs_f64(DEFAULT_TIMEOUT_S),
        }
    }

    /// Reads `AUTOOPT_LLM_ENDPOINT` (required), `AUTOOPT_LLM_API_KEY`,
    /// `AUTOOPT_LLM_MODEL` and `AUTOOPT_LLM_TIMEOUT_S`.
    pub fn from_env() -> Result<Self, AgentError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let endpoint = var("AUTOOPT_LLM_ENDPOINT")
            .ok_or_else(|| AgentError::NotConfigured("AUTOOPT_LLM_ENDPOINT is not set".into()))?;
        let mut s = Self::new(endpoint);
        s.api_key = var("AUTOOPT_LLM_API_KEY");
        if let Some(m) = var("AUTOOPT_LLM_MODEL") {
            s.model = m;
        }
        if let Some(t) = var("AUTOOPT_LLM_TIMEOUT_S") {
            let secs: f64 = t.parse().map_err(|_| {
                AgentError::NotConfigured(format!("AUTOOPT_LLM_TIMEOUT_S is not a number: {t}"))
            })?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(AgentError::NotConfigured("AUTOOPT_LLM_TIMEOUT_S must be positive".into()));
            }
            s.timeout = Duration::from_secs_f64(secs);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    settings: ClientSettings,
    http: reqwest::blocking::Client,
}

impl ChatClient {
    pub fn new(settings: ClientSettings) -> Result<Self, AgentError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(Self { settings, http })
    }

    pub fn settings(&self) -> &ClientSettings {
        &self.settings
    }

    /// Sends one system+user exchange and returns the first choice's text.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, AgentError> {
        let body = json!({
            "model": self.settings.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.http.post(&self.settings.endpoint).json(&body);
        if let Some(key) = &self.settings.api_key {
            req = req.bearer_auth(key);
        }
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                AgentError::Timeout
            } else {
                AgentError::Transport(e.to_string())
            }
        };
        let resp = req.send().map_err(classify)?;
        let status = resp.status();
        let text = resp.text().map_err(classify)?;
        if !status.is_success() {
            return Err(AgentError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| AgentError::Parse(format!("endpoint reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| AgentError::Parse("reply has no choices[0].message.content".into()))
    }
}

/// The JSON object inside a model reply, tolerating code fences and prose.
pub(crate) fn extract_json(reply: &str) -> Option<&str> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    (end >= start).then(|| &reply[start..=end])
}

const SYSTEM_PROMPT: &str =
    "You help place virtual widgets in a mixed reality workspace. Reply with a single JSON object and nothing else.";

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: ChatClient,
    examples: Vec<FewShotExample>,
}

impl RemoteBackend {
    pub fn new(client: ChatClient, examples: Vec<FewShotExample>) -> Self {
        Self { client, examples }
    }

    pub fn from_env() -> Result<Self, AgentError> {
        Ok(Self::new(ChatClient::new(ClientSettings::from_env()?)?, packaged_corpus()))
    }

    fn ask<T>(&self, prompt: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, AgentError> {
        let mut last = String::new();
        for _ in 0..2 {
            let reply = self.client.complete(SYSTEM_PROMPT, prompt)?;
            match extract_json(&reply).ok_or_else(|| "no JSON object in reply".to_owned()).and_then(&parse) {
                Ok(v) => return Ok(v),
                Err(e) => last = e,
            }
        }
        Err(AgentError::Parse(last))
    }

    fn common(ctx: &AgentContext<'_>, template: &str) -> String {
        let widgets: Vec<String> = ctx
            .scene
            .widgets
            .iter()
            .map(|w| format!("{} ({})", w.name, w.description))
            .collect();
        let areas: Vec<&str> = ctx.scene.objects.iter().map(|o| o.name.as_str()).collect();
        template
            .replace("{number of widgets}", &ctx.scene.widgets.len().to_string())
            .replace("{list of widgets}", &widgets.join(", "))
            .replace("{list of areas}", &areas.join(", "))
            .replace("{scene}", &describe_scene(ctx.scene))
            .replace("{user's instructions}", &ctx.combined())
    }

    pub fn ambiguity_prompt(&self, ctx: &AgentContext<'_>) -> String {
        let examples: Vec<String> = self
            .examples
            .iter()
            .map(|e| format!("- [{}] {}", e.label, e.instruction))
            .collect();
        Self::common(ctx, AMBIGUITY_TEMPLATE).replace("{examples}", &examples.join("\n"))
    }

    pub fn configuration_prompt(&self, ctx: &AgentContext<'_>) -> String {
        Self::common(ctx, CONFIGURATION_TEMPLATE)
    }

    pub fn validation_prompt(&self, ctx: &AgentContext<'_>, candidates: &[CandidateLayout]) -> String {
        let listing: Vec<String> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let objectives: Vec<String> = c.objectives.iter().map(|v| format!("{v:.3}")).collect();
                format!(
                    "Candidate {i}: {} Objective values: [{}]. Constraint violation: {:.3}.",
                    describe_layout(ctx.scene, &c.layout),
                    objectives.join(", "),
                    c.constraints.total()
                )
            })
            .collect();
        Self::common(ctx, VALIDATION_TEMPLATE).replace("{candidates}", &listing.join("\n"))
    }
}

#[derive(Deserialize)]
struct AmbiguityReply {
    sufficient: bool,
    #[serde(default)]
    facet: Option<Facet>,
    #[serde(default)]
    question: Option<String>,
}

#[derive(Deserialize)]
struct ValidationReply {
    index: usize,
    #[serde(default)]
    rationale: String,
}

impl AgentBackend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn detect_ambiguity(&self, ctx: &AgentContext<'_>) -> Result<AmbiguityOutcome, AgentError> {
        let reply = self.ask(&self.ambiguity_prompt(ctx), |s| {
            let r: AmbiguityReply = serde_json::from_str(s).map_err(|e| e.to_string())?;
            if r.sufficient {
                return Ok(None);
            }
            let question = r
                .question
                .filter(|q| !q.trim().is_empty())
                .ok_or("ambiguous reply without a question")?;
            Ok(Some((question, r.facet.unwrap_or(Facet::Widgets))))
        })?;
        Ok(match reply {
            None => AmbiguityOutcome::Clear {
                instruction: ctx.combined(),
            },
            Some((question, facet)) => AmbiguityOutcome::Ambiguous { question, facet },
        })
    }

    fn configure(&self, ctx: &AgentContext<'_>) -> Result<OptimizationSpec, AgentError> {
        let spec = self.ask(&self.configuration_prompt(ctx), |s| {
            parse_spec(s).map_err(|e| e.to_string())
        })?;
        let violations = validate_spec(&spec, ctx.scene);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(AgentError::InvalidSpec(violations))
        }
    }

    fn validate_candidates(
        &self,
        ctx: &AgentContext<'_>,
        _spec: &OptimizationSpec,
        candidates: &[CandidateLayout],
    ) -> Result<ValidationChoice, AgentError> {
        if candidates.is_empty() {
            return Err(AgentError::NoCandidates);
        }
        let r: ValidationReply = self.ask(&self.validation_prompt(ctx, candidates), |s| {
            serde_json::from_str(s).map_err(|e| e.to_string())
        })?;
        if r.index >= candidates.len() {
            return Err(AgentError::OutOfRange {
                index: r.index,
                count: candidates.len(),
            });
        }
        Ok(ValidationChoice {
            index: r.index,
            rationale: r.rationale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{load_scene, packaged};

    #[test]
    fn json_extraction() {
        assert_eq!(extract_json("```json\n{\"a\": 1}\n```"), Some("{\"a\": 1}"));
        assert_eq!(extract_json("none here"), None);
    }

    #[test]
    fn prompts_fill_every_placeholder() {
        let scene = load_scene(packaged::OFFICE).unwrap();
        let backend = RemoteBackend::new(
            ChatClient::new(ClientSettings::new("http://127.0.0.1:9")).unwrap(),
            packaged_corpus(),
        );
        let h = vec!["Put the email on the monitor.".to_owned()];
        let ctx = AgentContext::new(&scene, &h);
        for p in [
            backend.ambiguity_prompt(&ctx),
            backend.configuration_prompt(&ctx),
            backend.validation_prompt(&ctx, &[]),
        ] {
            assert!(p.contains("Put the email on the monitor."));
            for placeholder in ["{user's instructions}", "{list of widgets}", "{list of areas}", "{examples}"] {
                assert!(!p.contains(placeholder), "{placeholder} left in prompt");
            }
        }
    }
}
