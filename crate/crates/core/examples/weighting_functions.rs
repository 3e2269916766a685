//! Tabulate the built-in weighting functions on a 252-stage horizon.

use dlp::weights::{eval_domain, WeightKind, WeightSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 252;
    let kinds = [WeightKind::Constant { w: 0.8 }, WeightKind::LogRamp, WeightKind::SinBurst, WeightKind::EdgeSin];
    let tables = kinds
        .iter()
        .map(|k| eval_domain(&WeightSpec::new(k.clone(), 1.0)?, n))
        .collect::<Result<Vec<_>, _>>()?;
    println!("stage,{}", kinds.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
    for stage in (0..=n).step_by(21) {
        let row: Vec<String> = tables.iter().map(|t| format!("{:.4}", t[stage])).collect();
        println!("{stage},{}", row.join(","));
    }
    Ok(())
}
