//! Reference replies and instances taken from the prompt template and the
//! worked examples. Shared by tests, examples and the golden suite.

use crate::model::{Action, Context, Source, ToolCall, ToolSpec, TrainingInstance};
use serde_json::json;

/// The complete reply shown in the prompt template.
pub const TEMPLATE_REPLY: &str = r#"<think>To address the query, I need to send the email to Bob and then buy the banana through walmart.</think> <tool_call> [{"name":"email", "arguments":{"receiver": "Bob", "content": "I will bug banana through walmart"}}, {"name": "walmart", "arguments": {"input": "banana"}}]</tool_call>"#;

/// Single call: find a hair stylist.
pub const SINGLE_CALL_REPLY: &str = r#"<think>To search for a hair stylist in Lafayette, Louisiana, I will use the "Services_1_FindProvider" function with the required city parameter.</think> <tool_call>[{"name": "Services_1_FindProvider", "arguments": {"city": "Lafayette, LA"}}]</tool_call>"#;

/// Three parallel calls: total drone distance.
pub const PARALLEL_CALL_REPLY: &str = r#"<think>To calculate the total distance the drone has traveled, I will use the "math.hypot" function to calculate the Euclidean distance between each pair of points. First, I will calculate the distance from the initial point (5, 7) to the new point (10, 15). Then, I will calculate the distance from the new point (10, 15) to the final point (20, 25). The sum of these two distances will be the total distance traveled by the drone.</think>
<tool_call>[{"name": "math.hypot", "arguments": {"x": 5, "y": 7}}, {"name": "math.hypot", "arguments": {"x": 10, "y": 15}}, {"name": "math.hypot", "arguments": {"x": 20, "y": 25}}]</tool_call>"#;

pub fn email_walmart_action() -> Action {
    Action::new(vec![
        ToolCall::new(
            "email",
            json!({"receiver": "Bob", "content": "I will bug banana through walmart"}),
        ),
        ToolCall::new("walmart", json!({"input": "banana"})),
    ])
}

pub fn email_walmart_instance() -> TrainingInstance {
    TrainingInstance {
        id: "email-walmart".into(),
        query: "Tell Bob I will buy a banana, then buy it on walmart.".into(),
        tools: vec![
            ToolSpec::new(
                "email",
                "Send an email.",
                json!({"type": "object", "properties": {"receiver": {"type": "string"}, "content": {"type": "string"}}, "required": ["receiver", "content"]}),
            ),
            ToolSpec::new(
                "walmart",
                "Buy an item at walmart.",
                json!({"type": "object", "properties": {"input": {"type": "string"}}, "required": ["input"]}),
            ),
        ],
        context: Context::default(),
        ground_truth: email_walmart_action(),
        category: Some("parallel_multiple".into()),
        source: Source::Synthetic,
    }
}

pub fn hair_stylist_instance() -> TrainingInstance {
    TrainingInstance {
        id: "hair-stylist".into(),
        query: "Can you search for a hair stylist in Lafayette in Louisiana for me, please?".into(),
        tools: vec![ToolSpec::new(
            "Services_1_FindProvider",
            "Discover a hair stylist in a given city.",
            json!({"type": "object", "properties": {"city": {"type": "string"}, "is_unisex": {"type": "boolean"}}, "required": ["city"]}),
        )],
        context: Context::default(),
        ground_truth: Action::new(vec![ToolCall::new(
            "Services_1_FindProvider",
            json!({"city": "Lafayette, LA"}),
        )]),
        category: Some("simple".into()),
        source: Source::Synthetic,
    }
}

pub fn drone_distance_instance() -> TrainingInstance {
    TrainingInstance {
        id: "drone-distance".into(),
        query: "Imagine you are a drone operator. You are currently operating a drone that is at a point (5, 7) in the sky. You are asked to move the drone to a new point (10, 15). After reaching the new point, you are again asked to move the drone to another point (20, 25). Can you calculate the total distance the drone has traveled using the Euclidean norm method?".into(),
        tools: vec![ToolSpec::new(
            "math.hypot",
            "Calculate the Euclidean norm, sqrt(sum(squares)).",
            json!({"type": "object", "properties": {"x": {"type": "integer"}, "y": {"type": "integer"}, "z": {"type": "integer"}}, "required": ["x", "y"]}),
        )],
        context: Context::default(),
        ground_truth: Action::new(vec![
            ToolCall::new("math.hypot", json!({"x": 5, "y": 7})),
            ToolCall::new("math.hypot", json!({"x": 10, "y": 15})),
            ToolCall::new("math.hypot", json!({"x": 20, "y": 25})),
        ]),
        category: Some("parallel".into()),
        source: Source::Synthetic,
    }
}
