//! Domain types shared across the crate.
//!
//! Everything here is a plain value: equality is structural and every type
//! round-trips through serde.

use crate::canonical::canonical_object;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

/// A tool the model may call: name, description and parameter schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Stored verbatim; never validated against call arguments.
    #[serde(default = "empty_object")]
    pub parameters: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ToolSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>, parameters: Value) -> Self {
        ToolSpec {
            name: name.into(),
            description: description.into(),
            parameters,
        }
    }
}

/// One invocation: a tool name plus its argument map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(map) => map,
            Value::Null => Map::new(),
            other => panic!("tool call arguments must be a JSON object, got {other}"),
        };
        ToolCall {
            name: name.into(),
            arguments,
        }
    }

    /// Canonical `{"arguments":..,"name":..}` text; the matcher compares these.
    pub fn canonical(&self) -> String {
        format!(
            "{{\"arguments\":{},\"name\":{}}}",
            canonical_object(&self.arguments),
            serde_json::to_string(&self.name).expect("string serialization")
        )
    }
}

/// The calls issued in a single step. Parallel calls share one action.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action {
    pub calls: Vec<ToolCall>,
}

impl Action {
    pub fn new(calls: Vec<ToolCall>) -> Self {
        Action { calls }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Canonical JSON array of the calls, in their current order.
    pub fn canonical(&self) -> String {
        let parts: Vec<String> = self.calls.iter().map(ToolCall::canonical).collect();
        format!("[{}]", parts.join(","))
    }
}

impl From<Vec<ToolCall>> for Action {
    fn from(calls: Vec<ToolCall>) -> Self {
        Action { calls }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation {
    pub text: String,
}

impl From<&str> for Observation {
    fn from(text: &str) -> Self {
        Observation { text: text.to_owned() }
    }
}

/// A completed (action, observation) pair of the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextStep {
    pub action: Action,
    pub observation: Observation,
}

/// Everything that happened before the step being predicted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context {
    pub steps: Vec<ContextStep>,
}

impl Context {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "xlam-like")]
    XlamLike,
    #[serde(rename = "toolace-like")]
    ToolaceLike,
    #[serde(rename = "synthetic")]
    Synthetic,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::XlamLike => "xlam-like",
            Source::ToolaceLike => "toolace-like",
            Source::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One single-step prediction problem: query, candidate tools, history and
/// the reference action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub id: String,
    pub query: String,
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub context: Context,
    pub ground_truth: Action,
    #[serde(default)]
    pub category: Option<String>,
    pub source: Source,
}

/// A reply split into its reasoning and its parsed action.
///
/// The spans are byte ranges of the *inner* contents of the `<think>` and
/// `<tool_call>` blocks in the original text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub reasoning: String,
    pub action: Action,
    pub raw_think_span: Range<usize>,
    pub raw_call_span: Range<usize>,
}

/// Why a reply did not earn full credit.
///
/// The first eight variants mirror the parser's [`crate::parser::FormatErrorKind`]
/// one-for-one; the last three are matcher outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MissingThinkTag,
    MissingToolCallTag,
    TagOrder,
    DuplicateTags,
    TrailingContent,
    MalformedCallJson,
    EmptyCallArray,
    CallEntryShape,
    NameMismatch,
    ArgumentMismatch,
    CallCountMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_ok: bool,
    pub name_match: bool,
    pub call_match: bool,
    pub reward: f64,
    pub failure_reason: Option<FailureReason>,
}

/// How much partial credit a reply can earn.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    /// 1 iff tags are well-formed and the call matches; otherwise 0.
    #[default]
    BinaryWithFormat,
    /// 1 iff a matching call can be recovered from anywhere in the reply.
    BinaryNoFormat,
    /// 1 on full success, 0.2 for correct tags alone.
    FineGrainedFormat,
    /// 1 on full success, 0.2 for tags plus 0.2 for matching function names.
    FineGrainedFormatName,
}

impl RewardScheme {
    pub const ALL: [RewardScheme; 4] = [
        RewardScheme::BinaryWithFormat,
        RewardScheme::BinaryNoFormat,
        RewardScheme::FineGrainedFormat,
        RewardScheme::FineGrainedFormatName,
    ];

    /// Stable wire name.
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardScheme::BinaryWithFormat => "binary_with_format",
            RewardScheme::BinaryNoFormat => "binary_no_format",
            RewardScheme::FineGrainedFormat => "fine_grained_format",
            RewardScheme::FineGrainedFormatName => "fine_grained_format_name",
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RewardScheme::ALL
            .into_iter()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_owned()))
    }
}

/// N sampled replies for one prompt together with their rewards and
/// sequence-level log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub responses: Vec<String>,
    pub rewards: Vec<f64>,
    pub logp_new: Vec<f64>,
    pub logp_old: Vec<f64>,
    #[serde(default)]
    pub logp_ref: Option<Vec<f64>>,
}

impl RolloutGroup {
    pub fn new(
        responses: Vec<String>,
        rewards: Vec<f64>,
        logp_new: Vec<f64>,
        logp_old: Vec<f64>,
        logp_ref: Option<Vec<f64>>,
    ) -> Result<Self> {
        let group = RolloutGroup {
            responses,
            rewards,
            logp_new,
            logp_old,
            logp_ref,
        };
        group.validate()?;
        Ok(group)
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        if n < 2 {
            return Err(Error::usage(format!("rollout group needs at least 2 members, got {n}")));
        }
        let lengths = [
            ("responses", self.responses.len()),
            ("logp_new", self.logp_new.len()),
            ("logp_old", self.logp_old.len()),
        ];
        for (field, len) in lengths {
            if len != n {
                return Err(Error::usage(format!("{field} has length {len}, expected {n}")));
            }
        }
        if let Some(reference) = &self.logp_ref {
            if reference.len() != n {
                return Err(Error::usage(format!(
                    "logp_ref has length {}, expected {n}",
                    reference.len()
                )));
            }
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::usage("rewards must be finite"));
        }
        let logps = self
            .logp_new
            .iter()
            .chain(&self.logp_old)
            .chain(self.logp_ref.iter().flatten());
        for &lp in logps {
            if !lp.is_finite() || lp > 0.0 {
                return Err(Error::usage(format!("log-probability {lp} is not finite and <= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    /// Clip range around a ratio of 1.
    pub clip_epsilon: f64,
    /// Weight of the KL penalty.
    pub kl_beta: f64,
    /// Rollouts per prompt.
    pub group_size: usize,
    /// Added to the reward standard deviation before dividing.
    pub std_epsilon: f64,
    pub temperature: f64,
    pub max_steps: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            clip_epsilon: 0.2,
            kl_beta: 1e-3,
            group_size: 5,
            std_epsilon: 1e-6,
            temperature: 0.7,
            max_steps: 500,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::usage("clip_epsilon must lie in (0, 1)"));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(Error::usage("kl_beta must be finite and >= 0"));
        }
        if self.group_size < 2 {
            return Err(Error::usage("group_size must be at least 2"));
        }
        if self.std_epsilon.is_nan() || self.std_epsilon <= 0.0 {
            return Err(Error::usage("std_epsilon must be > 0"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::usage("temperature must be finite and > 0"));
        }
        Ok(())
    }
}
