//! Parse a reply, inspect its pieces, and score it against a reference action.
//!
//! ```bash
//! cargo run -p toolreward --example parse_and_score
//! ```

use toolreward::fixtures::{email_walmart_instance, TEMPLATE_REPLY};
use toolreward::{canonical_json, match_action, parse_response, score, RewardScheme};

fn main() {
    let instance = email_walmart_instance();

    let parsed = parse_response(TEMPLATE_REPLY).expect("reply is well-formed");
    println!("reasoning: {}", parsed.reasoning);
    for call in &parsed.action.calls {
        println!(
            "call:      {} {}",
            call.name,
            canonical_json(&serde_json::Value::Object(call.arguments.clone()))
        );
    }
    println!(
        "matches reference: {}",
        match_action(&parsed.action, &instance.ground_truth)
    );

    // Call order inside a parallel action does not matter.
    let reordered = r#"<think>walmart first</think><tool_call>[{"name": "walmart", "arguments": {"input": "banana"}}, {"name": "email", "arguments": {"content": "I will bug banana through walmart", "receiver": "Bob"}}]</tool_call>"#;
    let broken = "<think>forgot the closing tag</think><tool_call>[]";
    for (label, reply) in [
        ("template", TEMPLATE_REPLY),
        ("reordered", reordered),
        ("broken", broken),
    ] {
        let b = score(&instance, reply, RewardScheme::BinaryWithFormat);
        println!("{label:<10} reward {} failure {:?}", b.reward, b.failure_reason);
    }
}
