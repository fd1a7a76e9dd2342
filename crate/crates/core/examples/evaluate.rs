//! Score a prediction file against gold instances, per category.
//!
//! ```bash
//! cargo run -p toolreward --example evaluate -- [gold.jsonl] [pred.jsonl]
//! ```

use std::collections::HashMap;
use toolreward::eval::Prediction;
use toolreward::{evaluate, RewardScheme, TrainingInstance};

fn read_lines<T: serde::de::DeserializeOwned>(path: &str) -> Vec<T> {
    std::fs::read_to_string(path)
        .expect("readable file")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

fn main() -> toolreward::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut args = std::env::args().skip(1);
    let gold_path = args.next().unwrap_or_else(|| format!("{dir}/eval_gold.jsonl"));
    let pred_path = args.next().unwrap_or_else(|| format!("{dir}/eval_pred.jsonl"));

    let gold: Vec<TrainingInstance> = read_lines(&gold_path);
    let preds: HashMap<String, String> = read_lines::<Prediction>(&pred_path)
        .into_iter()
        .map(|p| (p.id, p.reply))
        .collect();

    let report = evaluate(&gold, &preds, RewardScheme::BinaryWithFormat)?;
    print!("{}", report.render_table());
    Ok(())
}
