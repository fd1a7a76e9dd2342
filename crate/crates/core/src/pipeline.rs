//! Normalizes raw tool-calling corpora into [`TrainingInstance`]s.
//!
//! Two input shapes are understood, one JSON object per line:
//!
//! ```text
//! xlam-like:    {"id", "query", "tools": [tool..], "answers": [call..]}
//! toolace-like: {"id", "system": "..<tools>[tool..]</tools>..",
//!                "conversations": [{"role": "user"|"assistant"|"tool", "content" | "tool_calls"}..]}
//! ```
//!
//! `tools`, `answers` and `tool_calls` may also be JSON-encoded strings.
//! Both shapes accept an optional `"category"` string.
//!
//! A toolace-like conversation must be one user turn followed by
//! alternating assistant tool-call turns and tool observations. The last
//! tool-call turn may lack its observation, and one plain-text assistant
//! answer may close the conversation. Each tool-call turn becomes one
//! instance whose context holds every earlier (action, observation) pair.
//!
//! Bad records are counted in the [`PipelineReport`] and never abort a run.

use crate::canonical::canonical_json;
use crate::model::{Action, Context, ContextStep, Observation, Source, ToolSpec, TrainingInstance};
use crate::parser::call_from_value;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ToolNotInCandidates,
    JsonParseFailure,
    FormatInconsistency,
    EmptyGroundTruth,
    DuplicateToolNames,
}

/// Report key for lines whose source could not be determined.
pub const UNKNOWN_SOURCE: &str = "unknown";

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub source: Source,
    pub payload: Map<String, Value>,
}

impl RawRecord {
    /// Guess the shape from the fields present.
    pub fn detect(payload: Map<String, Value>) -> Option<RawRecord> {
        let source = if payload.contains_key("conversations") {
            Source::ToolaceLike
        } else if payload.contains_key("answers") {
            Source::XlamLike
        } else {
            return None;
        };
        Some(RawRecord { source, payload })
    }
}

// ---------------------------------------------------------------------------
// Tools

/// Parse the single `<tools>[...]</tools>` block of a system prompt.
pub fn extract_tools_from_system(text: &str) -> Result<Vec<ToolSpec>, DropReason> {
    const OPEN: &str = "<tools>";
    const CLOSE: &str = "</tools>";
    if text.matches(OPEN).count() != 1 || text.matches(CLOSE).count() != 1 {
        return Err(DropReason::JsonParseFailure);
    }
    let start = text.find(OPEN).unwrap() + OPEN.len();
    let end = text.find(CLOSE).unwrap();
    if end < start {
        return Err(DropReason::JsonParseFailure);
    }
    let value: Value = serde_json::from_str(&text[start..end]).map_err(|_| DropReason::JsonParseFailure)?;
    let tools = tools_from_value(value)?;
    check_unique_names(&tools)?;
    Ok(tools)
}

fn tools_from_value(value: Value) -> Result<Vec<ToolSpec>, DropReason> {
    let Value::Array(items) = decode_embedded(value)? else {
        return Err(DropReason::JsonParseFailure);
    };
    items
        .into_iter()
        .map(|item| serde_json::from_value::<ToolSpec>(item).map_err(|_| DropReason::JsonParseFailure))
        .collect()
}

fn check_unique_names(tools: &[ToolSpec]) -> Result<(), DropReason> {
    let mut seen = HashSet::new();
    if tools.iter().all(|t| seen.insert(t.name.as_str())) {
        Ok(())
    } else {
        Err(DropReason::DuplicateToolNames)
    }
}

/// Strings holding JSON are decoded; anything else passes through.
fn decode_embedded(value: Value) -> Result<Value, DropReason> {
    match value {
        Value::String(s) => serde_json::from_str(&s).map_err(|_| DropReason::JsonParseFailure),
        other => Ok(other),
    }
}

fn action_from_field(value: Value) -> Result<Action, DropReason> {
    let Value::Array(items) = decode_embedded(value)? else {
        return Err(DropReason::FormatInconsistency);
    };
    items
        .into_iter()
        .map(|item| call_from_value(item).map_err(|_| DropReason::FormatInconsistency))
        .collect::<Result<Vec<_>, _>>()
        .map(Action::new)
}

// ---------------------------------------------------------------------------
// Validation

/// Classify an instance as kept (`Ok`) or dropped with the first failing rule.
pub fn validate_instance(candidate: &TrainingInstance) -> Result<(), DropReason> {
    if candidate.id.is_empty() {
        return Err(DropReason::FormatInconsistency);
    }
    if candidate
        .tools
        .iter()
        .any(|t| t.name.is_empty() || !t.parameters.is_object())
    {
        return Err(DropReason::FormatInconsistency);
    }
    check_unique_names(&candidate.tools)?;
    if candidate.ground_truth.is_empty() {
        return Err(DropReason::EmptyGroundTruth);
    }
    if candidate.ground_truth.calls.iter().any(|c| c.name.is_empty())
        || candidate.context.steps.iter().any(|s| s.action.is_empty())
    {
        return Err(DropReason::FormatInconsistency);
    }
    let names: HashSet<&str> = candidate.tools.iter().map(|t| t.name.as_str()).collect();
    if candidate
        .ground_truth
        .calls
        .iter()
        .any(|c| !names.contains(c.name.as_str()))
    {
        return Err(DropReason::ToolNotInCandidates);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Multi-turn segmentation

#[derive(Debug, Clone, PartialEq)]
pub enum Turn {
    User(String),
    AssistantCalls(Action),
    AssistantText(String),
    Tool(String),
}

impl Turn {
    fn from_value(value: Value) -> Result<Turn, DropReason> {
        let Value::Object(mut obj) = value else {
            return Err(DropReason::FormatInconsistency);
        };
        let role = match obj.remove("role") {
            Some(Value::String(r)) => r,
            _ => return Err(DropReason::FormatInconsistency),
        };
        let text = |obj: &mut Map<String, Value>| match obj.remove("content") {
            Some(Value::String(s)) => Ok(s),
            _ => Err(DropReason::FormatInconsistency),
        };
        match role.as_str() {
            "user" => text(&mut obj).map(Turn::User),
            "tool" => text(&mut obj).map(Turn::Tool),
            "assistant" => match obj.remove("tool_calls") {
                Some(Value::Null) | None => text(&mut obj).map(Turn::AssistantText),
                Some(calls) => action_from_field(calls).map(Turn::AssistantCalls),
            },
            _ => Err(DropReason::FormatInconsistency),
        }
    }
}

/// A trajectory with a fixed tool set.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub tools: Vec<ToolSpec>,
    pub turns: Vec<Turn>,
    pub category: Option<String>,
    pub source: Source,
}

/// One instance per assistant tool-call turn.
///
/// Instance ids are the conversation id when there is a single tool-call
/// turn and `<id>/turn-<j>` (1-based) otherwise.
pub fn segment_multiturn(conversation: &Conversation) -> Result<Vec<TrainingInstance>, DropReason> {
    let turns = &conversation.turns;
    let Some(Turn::User(query)) = turns.first() else {
        return Err(DropReason::FormatInconsistency);
    };

    let mut context = Context::default();
    let mut targets: Vec<(Context, Action)> = Vec::new();
    let mut i = 1;
    while i < turns.len() {
        match (&turns[i], turns.get(i + 1)) {
            (Turn::AssistantCalls(action), Some(Turn::Tool(obs))) => {
                targets.push((context.clone(), action.clone()));
                context.steps.push(ContextStep {
                    action: action.clone(),
                    observation: Observation { text: obs.clone() },
                });
                i += 2;
            }
            (Turn::AssistantCalls(action), None) => {
                targets.push((context.clone(), action.clone()));
                i += 1;
            }
            (Turn::AssistantText(_), None) if !targets.is_empty() => i += 1,
            _ => return Err(DropReason::FormatInconsistency),
        }
    }
    if targets.is_empty() {
        return Err(DropReason::EmptyGroundTruth);
    }

    let single = targets.len() == 1;
    Ok(targets
        .into_iter()
        .enumerate()
        .map(|(j, (context, ground_truth))| TrainingInstance {
            id: if single {
                conversation.id.clone()
            } else {
                format!("{}/turn-{}", conversation.id, j + 1)
            },
            query: query.clone(),
            tools: conversation.tools.clone(),
            context,
            ground_truth,
            category: conversation.category.clone(),
            source: conversation.source,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Record mapping

fn string_field(obj: &mut Map<String, Value>, key: &str) -> Result<String, DropReason> {
    match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(Value::Number(n)) if key == "id" => Ok(n.to_string()),
        _ => Err(DropReason::FormatInconsistency),
    }
}

fn category_field(obj: &mut Map<String, Value>) -> Result<Option<String>, DropReason> {
    match obj.remove("category") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(DropReason::FormatInconsistency),
    }
}

fn map_xlam(mut obj: Map<String, Value>) -> Result<Vec<TrainingInstance>, DropReason> {
    let id = string_field(&mut obj, "id")?;
    let query = string_field(&mut obj, "query")?;
    let tools = tools_from_value(obj.remove("tools").ok_or(DropReason::FormatInconsistency)?)?;
    let ground_truth = action_from_field(obj.remove("answers").ok_or(DropReason::FormatInconsistency)?)?;
    let category = category_field(&mut obj)?;
    Ok(vec![TrainingInstance {
        id,
        query,
        tools,
        context: Context::default(),
        ground_truth,
        category,
        source: Source::XlamLike,
    }])
}

fn map_toolace(mut obj: Map<String, Value>) -> Result<Vec<TrainingInstance>, DropReason> {
    let id = string_field(&mut obj, "id")?;
    let system = string_field(&mut obj, "system")?;
    let tools = extract_tools_from_system(&system)?;
    let Some(Value::Array(raw_turns)) = obj.remove("conversations") else {
        return Err(DropReason::FormatInconsistency);
    };
    let turns = raw_turns
        .into_iter()
        .map(Turn::from_value)
        .collect::<Result<Vec<_>, _>>()?;
    let category = category_field(&mut obj)?;
    segment_multiturn(&Conversation {
        id,
        tools,
        turns,
        category,
        source: Source::ToolaceLike,
    })
}

/// Map, segment and validate one record. All-or-nothing: if any segment
/// fails validation the whole record is dropped.
pub fn process_record(record: RawRecord) -> Result<Vec<TrainingInstance>, DropReason> {
    let instances = match record.source {
        Source::XlamLike => map_xlam(record.payload)?,
        Source::ToolaceLike => map_toolace(record.payload)?,
        Source::Synthetic => {
            let inst: TrainingInstance =
                serde_json::from_value(Value::Object(record.payload)).map_err(|_| DropReason::FormatInconsistency)?;
            vec![inst]
        }
    };
    for inst in &instances {
        validate_instance(inst)?;
    }
    Ok(instances)
}

// ---------------------------------------------------------------------------
// Streaming ingestion

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub raw: usize,
    pub kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    /// Instances emitted (after segmentation).
    pub instances: usize,
}

impl SourceCounts {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Keyed by source name, plus [`UNKNOWN_SOURCE`] for undetectable lines.
    pub counts: BTreeMap<String, SourceCounts>,
    /// Instances produced from records with more than one tool-call turn.
    pub segmented: usize,
}

impl PipelineReport {
    pub fn total_raw(&self) -> usize {
        self.counts.values().map(|c| c.raw).sum()
    }

    pub fn total_kept(&self) -> usize {
        self.counts.values().map(|c| c.kept).sum()
    }

    pub fn total_dropped(&self) -> BTreeMap<DropReason, usize> {
        let mut out = BTreeMap::new();
        for c in self.counts.values() {
            for (reason, n) in &c.dropped {
                *out.entry(*reason).or_insert(0) += n;
            }
        }
        out
    }

    pub fn total_instances(&self) -> usize {
        self.counts.values().map(|c| c.instances).sum()
    }
}

/// Incremental ingestion. Feed records or lines; read the report at the end.
#[derive(Debug, Default)]
pub struct Pipeline {
    report: PipelineReport,
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    fn tally(&mut self, key: &str, outcome: Result<&[TrainingInstance], DropReason>) {
        let counts = self.report.counts.entry(key.to_owned()).or_default();
        counts.raw += 1;
        match outcome {
            Ok(instances) => {
                counts.kept += 1;
                counts.instances += instances.len();
                if instances.len() > 1 {
                    self.report.segmented += instances.len();
                }
            }
            Err(reason) => *counts.dropped.entry(reason).or_insert(0) += 1,
        }
    }

    pub fn push(&mut self, record: RawRecord) -> Vec<TrainingInstance> {
        let key = record.source.as_str();
        match process_record(record) {
            Ok(instances) => {
                self.tally(key, Ok(&instances));
                instances
            }
            Err(reason) => {
                self.tally(key, Err(reason));
                Vec::new()
            }
        }
    }

    /// Ingest one JSONL line. `source = None` detects the shape per line.
    /// Blank lines are ignored.
    pub fn push_line(&mut self, source: Option<Source>, line: &str) -> Vec<TrainingInstance> {
        if line.trim().is_empty() {
            return Vec::new();
        }
        let fallback = source.map_or(UNKNOWN_SOURCE, |s| s.as_str());
        let payload = match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(map)) => map,
            _ => {
                self.tally(fallback, Err(DropReason::JsonParseFailure));
                return Vec::new();
            }
        };
        let record = match source {
            Some(source) => Some(RawRecord { source, payload }),
            None => RawRecord::detect(payload),
        };
        match record {
            Some(record) => self.push(record),
            None => {
                self.tally(fallback, Err(DropReason::FormatInconsistency));
                Vec::new()
            }
        }
    }

    pub fn report(&self) -> &PipelineReport {
        &self.report
    }

    pub fn finish(self) -> PipelineReport {
        self.report
    }
}

pub fn ingest(records: impl IntoIterator<Item = RawRecord>) -> (Vec<TrainingInstance>, PipelineReport) {
    let mut pipeline = Pipeline::new();
    let instances = records.into_iter().flat_map(|r| pipeline.push(r)).collect();
    (instances, pipeline.finish())
}

pub fn ingest_jsonl(
    source: Option<Source>,
    reader: impl BufRead,
) -> std::io::Result<(Vec<TrainingInstance>, PipelineReport)> {
    let mut pipeline = Pipeline::new();
    let mut instances = Vec::new();
    for line in reader.lines() {
        instances.extend(pipeline.push_line(source, &line?));
    }
    Ok((instances, pipeline.finish()))
}

// ---------------------------------------------------------------------------
// Prompt rendering

const PROMPT_HEAD: &str = "You are an expert in composing functions. You are given a question and a set of possible functions. Based on the question, you will need to make one or more function/tool calls to achieve the purpose. If none of the function can be used, point it out. If the given question lacks the parameters required by the function, also point it out. You should only return the function call in tools call sections.

# Tool

Here is a list of functions in JSON format that you can invoke:
<tools>
";

const PROMPT_TAIL: &str = "
</tools>.

In each action step, you MUST:
1. Think about the reasoning process in the mind and enclosed your reasoning within <think></think> XML tags.
2. Then, provide a json object with function names and arguments within <tool_call> </tool_call> XML tags. i.e., <tool_call>[{\"name\": <function-name>, \"arguments\": <args-json-object>}, {\"name\": <function-name2>, \"arguments\": <args-json-object2>}, ...]</tool_call>
3. Make sure both the reasoning and the tool call steps are included together in one single reply.

A complete reply example is: <think>To address the query, I need to send the email to Bob and then buy the banana through walmart.</think> <tool_call> [{\"name\":\"email\", \"arguments\":{\"receiver\": \"Bob\", \"content\": \"I will bug banana through walmart\"}}, {\"name\": \"walmart\", \"arguments\": {\"input\": \"banana\"}}]</tool_call>. Please make sure the type of the arguments is correct.";

/// Header that separates the instruction block from the rendered history.
pub const CONTEXT_HEADER: &str = "# Context";
/// Header that introduces the user query.
pub const QUERY_HEADER: &str = "# Query";

/// System prompt with `{tools}` filled in: a JSON array of the canonical
/// tool specs in instance order.
pub fn render_system(tools: &[ToolSpec]) -> String {
    let specs: Vec<String> = tools
        .iter()
        .map(|t| canonical_json(&serde_json::to_value(t).expect("tool spec serializes")))
        .collect();
    format!("{PROMPT_HEAD}[{}]{PROMPT_TAIL}", specs.join(","))
}

/// Full training prompt: system block, prior steps, then the query.
pub fn render_prompt(instance: &TrainingInstance) -> String {
    let mut out = render_system(&instance.tools);
    if !instance.context.is_empty() {
        out.push_str("\n\n");
        out.push_str(CONTEXT_HEADER);
        for step in &instance.context.steps {
            out.push_str("\n<tool_call>");
            out.push_str(&step.action.canonical());
            out.push_str("</tool_call>\n");
            out.push_str(&step.observation.text);
        }
    }
    out.push_str("\n\n");
    out.push_str(QUERY_HEADER);
    out.push('\n');
    out.push_str(&instance.query);
    out
}
