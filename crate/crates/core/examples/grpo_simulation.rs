//! Train the toy categorical policy on the bundled five-task fixture.
//!
//! ```bash
//! cargo run -p toolreward --example grpo_simulation -- [seed] [steps]
//! ```

use toolreward::sim::{default_tasks, run_simulation};
use toolreward::GrpoConfig;

fn main() -> toolreward::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);

    let tasks = default_tasks();
    let config = GrpoConfig::default();
    let trace = run_simulation(&tasks, &config, 0.5, steps, seed)?;

    for record in trace.records.iter().step_by(10) {
        let worst = record.win_prob.values().copied().fold(1.0, f64::min);
        println!(
            "step {:>4}  reward {:.3}  kl {:.2e}  len {:>6.1}  min win_prob {:.3}",
            record.step, record.mean_reward, record.mean_kl, record.mean_resp_len, worst
        );
    }
    match trace.converged_at {
        Some(step) => println!("all tasks above 0.95 after {step} steps"),
        None => println!("not converged within {steps} steps"),
    }
    for (id, p) in &trace.final_win_prob {
        println!("  {id:<18} {p:.4}");
    }
    Ok(())
}
