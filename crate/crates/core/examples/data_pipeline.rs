//! Normalize a raw JSONL corpus into training instances and print the report.
//!
//! ```bash
//! cargo run -p toolreward --example data_pipeline -- [path/to/raw.jsonl]
//! ```

use std::fs::File;
use std::io::BufReader;
use toolreward::pipeline::ingest_jsonl;
use toolreward::render_prompt;

fn main() -> std::io::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pipeline_mixed.jsonl").to_owned());
    let (instances, report) = ingest_jsonl(None, BufReader::new(File::open(&path)?))?;

    for (source, counts) in &report.counts {
        println!(
            "{source:<14} raw {:>3}  kept {:>3}  instances {:>3}  dropped {:?}",
            counts.raw, counts.kept, counts.instances, counts.dropped
        );
    }
    println!("multi-turn segments: {}\n", report.segmented);

    for inst in instances.iter().take(3) {
        println!("{} ({} calls)", inst.id, inst.ground_truth.calls.len());
    }
    if let Some(last) = instances.last() {
        let prompt = render_prompt(last);
        let tail: String = prompt
            .lines()
            .rev()
            .take(6)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect::<Vec<_>>()
            .join("\n");
        println!("\nprompt tail for {}:\n{tail}", last.id);
    }
    Ok(())
}
