//! Splits a model reply into its `<think>` and `<tool_call>` blocks and parses
//! the call payload.
//!
//! Accepted grammar, with only whitespace allowed around and between blocks:
//!
//! ```text
//! <think>REASONING</think> <tool_call>[{"name": .., "arguments": {..}}, ..]</tool_call>
//! ```
//!
//! Tags are literal and case-sensitive. Each tag must appear exactly once.

use crate::model::{Action, FailureReason, ParsedResponse, ToolCall};
use serde_json::Value;
use std::ops::Range;
use thiserror::Error;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const CALL_OPEN: &str = "<tool_call>";
const CALL_CLOSE: &str = "</tool_call>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormatErrorKind {
    MissingThinkTag,
    MissingToolCallTag,
    TagOrder,
    DuplicateTags,
    TrailingContent,
    MalformedCallJson,
    EmptyCallArray,
    CallEntryShape,
}

impl From<FormatErrorKind> for FailureReason {
    fn from(kind: FormatErrorKind) -> Self {
        match kind {
            FormatErrorKind::MissingThinkTag => FailureReason::MissingThinkTag,
            FormatErrorKind::MissingToolCallTag => FailureReason::MissingToolCallTag,
            FormatErrorKind::TagOrder => FailureReason::TagOrder,
            FormatErrorKind::DuplicateTags => FailureReason::DuplicateTags,
            FormatErrorKind::TrailingContent => FailureReason::TrailingContent,
            FormatErrorKind::MalformedCallJson => FailureReason::MalformedCallJson,
            FormatErrorKind::EmptyCallArray => FailureReason::EmptyCallArray,
            FormatErrorKind::CallEntryShape => FailureReason::CallEntryShape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {detail}")]
pub struct FormatError {
    pub kind: FormatErrorKind,
    pub detail: String,
}

impl FormatError {
    fn new(kind: FormatErrorKind, detail: impl Into<String>) -> Self {
        FormatError {
            kind,
            detail: detail.into(),
        }
    }
}

/// Inner contents of the two blocks, borrowed from the reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocks<'a> {
    pub think: &'a str,
    pub call: &'a str,
    pub think_span: Range<usize>,
    pub call_span: Range<usize>,
}

fn positions(text: &str, tag: &str) -> Vec<usize> {
    text.match_indices(tag).map(|(i, _)| i).collect()
}

fn only_whitespace(s: &str) -> bool {
    s.chars().all(char::is_whitespace)
}

/// Locate exactly one `<think>` block followed by exactly one `<tool_call>` block.
pub fn extract_blocks(text: &str) -> Result<Blocks<'_>, FormatError> {
    use FormatErrorKind::*;

    let think_open = positions(text, THINK_OPEN);
    let think_close = positions(text, THINK_CLOSE);
    let call_open = positions(text, CALL_OPEN);
    let call_close = positions(text, CALL_CLOSE);

    if think_open.is_empty() || think_close.is_empty() {
        return Err(FormatError::new(MissingThinkTag, "no <think>...</think> pair"));
    }
    if call_open.is_empty() || call_close.is_empty() {
        return Err(FormatError::new(
            MissingToolCallTag,
            "no <tool_call>...</tool_call> pair",
        ));
    }
    if [&think_open, &think_close, &call_open, &call_close]
        .iter()
        .any(|p| p.len() > 1)
    {
        return Err(FormatError::new(DuplicateTags, "a tag appears more than once"));
    }

    let (to, tc, co, cc) = (think_open[0], think_close[0], call_open[0], call_close[0]);
    let think_inner = to + THINK_OPEN.len()..tc;
    let call_inner = co + CALL_OPEN.len()..cc;
    let think_end = tc + THINK_CLOSE.len();
    let call_end = cc + CALL_CLOSE.len();

    if tc < think_inner.start || cc < call_inner.start {
        return Err(FormatError::new(TagOrder, "closing tag precedes its opening tag"));
    }
    if co < think_end {
        let detail = if call_end <= to {
            "tool_call block precedes think block"
        } else {
            "think and tool_call blocks interleave"
        };
        return Err(FormatError::new(TagOrder, detail));
    }
    if !only_whitespace(&text[..to]) || !only_whitespace(&text[think_end..co]) || !only_whitespace(&text[call_end..]) {
        return Err(FormatError::new(
            TrailingContent,
            "non-whitespace text outside the think and tool_call blocks",
        ));
    }

    Ok(Blocks {
        think: &text[think_inner.clone()],
        call: &text[call_inner.clone()],
        think_span: think_inner,
        call_span: call_inner,
    })
}

/// Parse the contents of a `<tool_call>` block.
pub fn parse_tool_calls(call_text: &str) -> Result<Action, FormatError> {
    let value: Value = serde_json::from_str(call_text)
        .map_err(|e| FormatError::new(FormatErrorKind::MalformedCallJson, e.to_string()))?;
    action_from_value(value)
}

/// Interpret an already-parsed JSON value as a call array.
pub fn action_from_value(value: Value) -> Result<Action, FormatError> {
    let items = match value {
        Value::Array(items) => items,
        other => {
            return Err(FormatError::new(
                FormatErrorKind::MalformedCallJson,
                format!("expected a JSON array of calls, got {}", kind_name(&other)),
            ))
        }
    };
    if items.is_empty() {
        return Err(FormatError::new(FormatErrorKind::EmptyCallArray, "call array is empty"));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            call_from_value(item)
                .map_err(|d| FormatError::new(FormatErrorKind::CallEntryShape, format!("entry {i}: {d}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Action::new)
}

/// An object with exactly `name` (non-empty string) and `arguments` (object).
pub(crate) fn call_from_value(item: Value) -> Result<ToolCall, String> {
    let Value::Object(mut obj) = item else {
        return Err(format!("expected an object, got {}", kind_name(&item)));
    };
    if let Some(extra) = obj.keys().find(|k| *k != "name" && *k != "arguments") {
        return Err(format!("unexpected key `{extra}`"));
    }
    let name = match obj.remove("name") {
        Some(Value::String(s)) if !s.is_empty() => s,
        Some(Value::String(_)) => return Err("empty `name`".into()),
        Some(other) => return Err(format!("`name` must be a string, got {}", kind_name(&other))),
        None => return Err("missing `name`".into()),
    };
    let arguments = match obj.remove("arguments") {
        Some(Value::Object(map)) => map,
        Some(other) => return Err(format!("`arguments` must be an object, got {}", kind_name(&other))),
        None => return Err("missing `arguments`".into()),
    };
    Ok(ToolCall { name, arguments })
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Full format check plus payload parse.
pub fn parse_response(text: &str) -> Result<ParsedResponse, FormatError> {
    let blocks = extract_blocks(text)?;
    let action = parse_tool_calls(blocks.call)?;
    Ok(ParsedResponse {
        reasoning: blocks.think.to_owned(),
        action,
        raw_think_span: blocks.think_span,
        raw_call_span: blocks.call_span,
    })
}

/// First JSON array anywhere in `text` that parses as a non-empty call array.
///
/// Used when the reward does not require the tag format.
pub fn lenient_extract(text: &str) -> Option<Action> {
    text.match_indices('[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => action_from_value(value).ok(),
            _ => None,
        }
    })
}

/// Render an action as a reply the parser accepts.
pub fn render_reply(reasoning: &str, action: &Action) -> String {
    format!(
        "{THINK_OPEN}{reasoning}{THINK_CLOSE}{CALL_OPEN}{}{CALL_CLOSE}",
        action.canonical()
    )
}
