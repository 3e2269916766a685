//! Closed-form mean and variance of the gain-loss against exact enumeration of
//! every path of a two-point return model.

use dlp::analytics::{brute_force_moments, gain_loss_stats, second_moment_gain_loss, TwoPointModel};
use dlp::policy::{MarketBounds, PolicyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = TwoPointModel::new(0.12, -0.09, 0.55)?;
    let moments = model.moments()?;
    let weights = [0.9, 0.2, 0.7, 0.7, 0.4, 1.0, 0.3, 0.8, 0.6, 0.5];
    println!("mu={:.5} sigma2={:.6}", moments.mu, moments.sigma2);
    for alpha in [0.3, 0.5, 0.7] {
        let config = PolicyConfig::frictionless(alpha, 1.0, MarketBounds::new(-0.5, 0.5)?)?;
        for k in [1, 4, 10] {
            let s = gain_loss_stats(&config, &weights, &moments, k)?;
            let (mean, var) = brute_force_moments(&config, &weights, &model, k)?;
            let second = second_moment_gain_loss(&config, &weights, &moments, k)?;
            println!(
                "alpha={alpha} k={k:>2}: mean {:+.6e} / {mean:+.6e}  variance {:.6e} / {var:.6e}  E[G^2]-mean^2 {:.6e}",
                s.mean,
                s.variance,
                second - s.mean * s.mean
            );
        }
    }
    Ok(())
}
