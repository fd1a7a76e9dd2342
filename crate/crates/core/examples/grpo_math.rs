//! Compute group-relative advantages and the clipped GRPO objective by hand.
//!
//! ```bash
//! cargo run -p toolreward --example grpo_math
//! ```

use toolreward::{advantages, clipped_term, grpo_objective, kl_term, GrpoConfig, RolloutGroup};

fn main() -> toolreward::Result<()> {
    let rewards = vec![1.0, 0.0, 0.2, 0.0, 1.0];
    let adv = advantages(&rewards, 1e-6)?;
    println!("rewards    {rewards:?}");
    println!(
        "advantages {:?}",
        adv.iter().map(|a| format!("{a:+.3}")).collect::<Vec<_>>()
    );
    println!("flat group {:?}", advantages(&[0.4; 4], 1e-6)?);

    println!("clipped_term(1.5, +1) = {}", clipped_term(1.5, 1.0, 0.2));
    println!("clipped_term(0.5, -1) = {}", clipped_term(0.5, -1.0, 0.2));
    println!("kl_term(-1.0, -1.2)   = {:.6}", kl_term(-1.0, -1.2));

    let group = RolloutGroup::new(
        (0..5).map(|i| format!("response {i}")).collect(),
        rewards,
        vec![-1.0, -2.1, -1.6, -2.4, -0.9],
        vec![-1.1, -2.0, -1.6, -2.2, -1.0],
        None,
    )?;
    let terms = grpo_objective(&group, &GrpoConfig::default())?;
    println!(
        "ratios     {:?}",
        terms.ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
    );
    println!("objective  {:.6}", terms.objective);
    Ok(())
}
