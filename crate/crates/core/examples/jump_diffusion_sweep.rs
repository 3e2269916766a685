//! Monte Carlo mean gain-loss across annual drifts for a jump-diffusion market.
//! Pass the number of paths as the first argument (default 2000).

use dlp::policy::{MarketBounds, PolicyConfig};
use dlp::sim::{linspace, mu_star_sweep, GbmJumpParams};
use dlp::weights::{WeightKind, WeightSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paths: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(2000);
    let config = PolicyConfig::frictionless(0.5, 1.0, MarketBounds::new(-0.9, 1.0)?)?;
    let grid = linspace(-1.0, 1.0, 11);
    for kind in [WeightKind::Constant { w: 0.8 }, WeightKind::EdgeSin] {
        let spec = WeightSpec::new(kind, 1.0)?;
        println!("{}", spec.label());
        for p in mu_star_sweep(&config, &spec, &GbmJumpParams::daily(0.0), &grid, paths, 42)? {
            println!("  mu*={:+.1}  mean {:+.5}  se {:.5}", p.mu_star, p.mean_gain, p.std_error);
        }
    }
    Ok(())
}
