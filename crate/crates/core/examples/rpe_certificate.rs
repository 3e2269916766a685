//! Scan expected gain-loss over a grid of mean returns and horizons and report
//! whether positivity is certified.

use dlp::analytics::{rpe_scan, ScanVerdict};
use dlp::policy::{MarketBounds, PolicyConfig};
use dlp::weights::{WeightKind, WeightSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bounds = MarketBounds::new(-0.5, 1.0)?;
    let mu_grid = [-0.9, -0.3, -0.05, -0.01, 0.01, 0.05, 0.3, 0.9];
    let weights = WeightSpec::new(WeightKind::LogRamp, 1.0)?.schedule(30, None)?;

    for alpha in [0.5, 0.6] {
        let config = PolicyConfig::frictionless(alpha, 1.0, bounds)?;
        let report = rpe_scan(&config, &weights, &mu_grid, 30)?;
        if let Some((gain, mu, k)) = report.min {
            println!("alpha={alpha}: min gain {gain:.3e} at mu={mu}, k={k}");
        }
        match report.verdict {
            ScanVerdict::Certified => println!("  certified"),
            ScanVerdict::NotCertifiable { reason } => println!("  not certifiable: {reason}"),
            ScanVerdict::Violated { mu, k, gain } => println!("  violated at mu={mu}, k={k}: {gain:e}"),
        }
    }
    Ok(())
}
