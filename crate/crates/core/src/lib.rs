//! Rule-based rewards and GRPO tooling for training tool-calling models.
//!
//! A model reply is expected to look like
//!
//! ```text
//! <think>reasoning</think><tool_call>[{"name": "f", "arguments": {"x": 1}}]</tool_call>
//! ```
//!
//! The crate parses such replies ([`parser`]), matches the calls against a
//! reference action ([`matcher`]), turns the outcome into a scalar reward
//! ([`reward`]), and provides the group-relative advantage and clipped
//! surrogate math used to train on those rewards ([`grpo`]). A small
//! categorical-policy simulator ([`sim`]) runs the whole loop end to end.
//! Raw corpora are normalized by [`pipeline`], prediction files scored by
//! [`eval`], and [`service`] exposes batch scoring over HTTP.
//!
//! ```
//! use toolreward::{score, RewardScheme};
//! use toolreward::fixtures::{email_walmart_instance, TEMPLATE_REPLY};
//!
//! let breakdown = score(&email_walmart_instance(), TEMPLATE_REPLY, RewardScheme::BinaryWithFormat);
//! assert_eq!(breakdown.reward, 1.0);
//! ```

pub mod canonical;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod grpo;
pub mod matcher;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod reward;
pub mod service;
pub mod sim;

pub use canonical::canonical_json;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use grpo::{advantages, clipped_term, grpo_objective, kl_term, ratio, GrpoTerms};
pub use matcher::{match_action, match_call, name_multiset_match};
pub use model::{
    Action, Context, ContextStep, FailureReason, GrpoConfig, Observation, ParsedResponse, RewardBreakdown,
    RewardScheme, RolloutGroup, Source, ToolCall, ToolSpec, TrainingInstance,
};
pub use parser::{extract_blocks, parse_response, parse_tool_calls, FormatError, FormatErrorKind};
pub use pipeline::{ingest, render_prompt, validate_instance, DropReason, PipelineReport};
pub use reward::{score, score_batch, ScoreItem};
pub use sim::{run_simulation, sample_group, update_policy, ToyPolicy, ToyTask, TrainTrace};
