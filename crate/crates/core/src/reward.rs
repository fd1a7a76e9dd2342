//! Rule-based rewards for tool-call replies.
//!
//! | scheme                     | full success | tags only | tags + names | else |
//! |----------------------------|--------------|-----------|--------------|------|
//! | `binary_with_format`       | 1.0          | 0         | 0            | 0    |
//! | `binary_no_format`         | 1.0 *        | 0         | 0            | 0    |
//! | `fine_grained_format`      | 1.0          | 0.2       | 0.2          | 0    |
//! | `fine_grained_format_name` | 1.0          | 0.2       | 0.4          | 0    |
//!
//! `*` success without tags: the first call array found anywhere in the reply
//! is matched instead.
//!
//! `format_ok` is a tag-level check. A reply with correct tags but an
//! unparseable payload still earns the fine-grained format credit and is
//! flagged `malformed_call_json`.

use crate::error::{Error, Result};
use crate::matcher::{match_action, name_multiset_match};
use crate::model::{Action, FailureReason, RewardBreakdown, RewardScheme, TrainingInstance};
use crate::parser::{extract_blocks, lenient_extract, parse_tool_calls, FormatErrorKind};
use rayon::prelude::*;

pub const FORMAT_CREDIT: f64 = 0.2;
pub const NAME_CREDIT: f64 = 0.2;

/// Score one reply. Never fails: malformed replies get 0 and a reason.
pub fn score(instance: &TrainingInstance, reply: &str, scheme: RewardScheme) -> RewardBreakdown {
    let gt = &instance.ground_truth;
    let blocks = extract_blocks(reply);
    let format_ok = blocks.is_ok();
    let strict: Result<Action, FormatErrorKind> = blocks.and_then(|b| parse_tool_calls(b.call)).map_err(|e| e.kind);

    let (action, parse_failure) = match strict {
        Ok(action) => (Some(action), None),
        Err(kind) if scheme == RewardScheme::BinaryNoFormat => (lenient_extract(reply), Some(kind)),
        Err(kind) => (None, Some(kind)),
    };

    let name_match = action.as_ref().is_some_and(|a| name_multiset_match(a, gt));
    let call_match = action.as_ref().is_some_and(|a| match_action(a, gt));
    let full = format_ok && parse_failure.is_none() && call_match;

    let reward = match scheme {
        RewardScheme::BinaryWithFormat => indicator(full),
        RewardScheme::BinaryNoFormat => indicator(call_match),
        RewardScheme::FineGrainedFormat => {
            if full {
                1.0
            } else if format_ok {
                FORMAT_CREDIT
            } else {
                0.0
            }
        }
        RewardScheme::FineGrainedFormatName => {
            if full {
                1.0
            } else {
                let mut r = 0.0;
                if format_ok {
                    r += FORMAT_CREDIT;
                    if name_match {
                        r += NAME_CREDIT;
                    }
                }
                r
            }
        }
    };

    let failure_reason = if reward == 1.0 {
        None
    } else {
        match (&action, parse_failure) {
            (Some(a), _) => Some(mismatch_reason(a, gt)),
            (None, Some(kind)) => Some(kind.into()),
            // action is only absent after a parse failure
            (None, None) => unreachable!("no action without a parse failure"),
        }
    };

    RewardBreakdown {
        format_ok,
        name_match,
        call_match,
        reward,
        failure_reason,
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn mismatch_reason(pred: &Action, gt: &Action) -> FailureReason {
    if pred.len() != gt.len() {
        FailureReason::CallCountMismatch
    } else if !name_multiset_match(pred, gt) {
        FailureReason::NameMismatch
    } else {
        FailureReason::ArgumentMismatch
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreItem<'a> {
    pub instance: &'a TrainingInstance,
    pub reply: &'a str,
    pub scheme: RewardScheme,
}

/// Score many replies in parallel; output order follows input order.
pub fn score_batch(items: &[ScoreItem<'_>]) -> Result<Vec<RewardBreakdown>> {
    if items.is_empty() {
        return Err(Error::usage("score_batch needs at least one item"));
    }
    Ok(items
        .par_iter()
        .map(|item| score(item.instance, item.reply, item.scheme))
        .collect())
}
