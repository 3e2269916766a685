//! Step the two-leg account through a short return path and print each stage.

use dlp::policy::{evolve, survivability_bound, MarketBounds, PolicyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bounds = MarketBounds::new(-0.3, 0.5)?;
    let config = PolicyConfig::frictionless(0.5, 100.0, bounds)?;
    let weights = [0.6, 0.8, 0.8, 1.0, 0.4, 0.7];
    let returns = [0.05, -0.12, 0.2, -0.3, 0.5, 0.01];

    let t = evolve(&config, &weights, &returns)?;
    println!("stage  v_long     v_short    total      gain");
    for (s, g) in t.states.iter().zip(&t.gains) {
        println!("{:>5}  {:<9.4}  {:<9.4}  {:<9.4}  {:+.6}", s.stage, s.v_long, s.v_short, s.total(), g);
    }

    let (long_floor, short_floor) = survivability_bound(&config, weights.len() as u32);
    println!("worst-case leg values after {} stages: {long_floor:.4} / {short_floor:.4}", weights.len());
    Ok(())
}
