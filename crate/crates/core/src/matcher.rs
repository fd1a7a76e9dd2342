//! Exact matching of predicted calls against the reference action.
//!
//! Argument maps compare by canonical JSON, so key order and integer-valued
//! float rendering never matter. Parallel calls compare as a multiset.

use crate::canonical::canonical_object;
use crate::model::{Action, ToolCall};

pub fn match_call(pred: &ToolCall, gt: &ToolCall) -> bool {
    pred.name == gt.name && canonical_object(&pred.arguments) == canonical_object(&gt.arguments)
}

/// Multiset equality of calls under [`match_call`].
pub fn match_action(pred: &Action, gt: &Action) -> bool {
    if pred.len() != gt.len() {
        return false;
    }
    sorted_canonical(pred) == sorted_canonical(gt)
}

/// Multiset equality of call names, arguments ignored.
pub fn name_multiset_match(pred: &Action, gt: &Action) -> bool {
    if pred.len() != gt.len() {
        return false;
    }
    sorted_names(pred) == sorted_names(gt)
}

fn sorted_canonical(action: &Action) -> Vec<String> {
    let mut forms: Vec<String> = action.calls.iter().map(ToolCall::canonical).collect();
    forms.sort_unstable();
    forms
}

fn sorted_names(action: &Action) -> Vec<&str> {
    let mut names: Vec<&str> = action.calls.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names
}
