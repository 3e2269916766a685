//! Backtest moving-average indicator weights and buy-and-hold on a synthetic
//! price file, printing the metric table.

use dlp::backtest::{buy_and_hold, ingest_csv, run_batch, write_batch_table_csv, BoundsMode};
use dlp::policy::{MarketBounds, PolicyConfig};
use dlp::sim::{simulate_path, GbmJumpParams};
use dlp::weights::WeightSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prices = simulate_path(&GbmJumpParams { sigma_star: 0.25, ..GbmJumpParams::daily(0.15) }, 3, 0)?;
    let mut text = String::from("timestamp,price\n");
    for (day, p) in prices.iter().enumerate() {
        text.push_str(&format!("{},{p}\n", 1_600_000_000 + 86_400 * day as i64));
    }
    let series = ingest_csv(text.as_bytes(), "SYN")?;

    let config = PolicyConfig::frictionless(0.5, 1.0, MarketBounds::new(-0.5, 1.0)?)?;
    let specs = ["ma:5", "ma:10", "ma:20", "ma:30"]
        .iter()
        .map(|s| Ok(WeightSpec::new(s.parse()?, 1.0)?))
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let mut reports = vec![buy_and_hold(config.v0, &series, config.bounds)?];
    reports.extend(run_batch(&config, &specs, &series, BoundsMode::Configured)?);
    write_batch_table_csv(std::io::stdout().lock(), &reports)?;
    Ok(())
}
