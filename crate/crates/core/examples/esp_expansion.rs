//! Elementary symmetric polynomials of a schedule and the parity-split
//! expansion of each leg's expected growth.

use dlp::esp::{e2_positive, esp_all, esp_naive, expected_growth_esp, expected_growth_product, Sign};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = [0.3, 0.5, 0.8, 0.1, 0.6];
    let table = esp_all(&w)?;
    for j in 1..=w.len() {
        println!("e_{j} = {:.6}  (enumerated {:.6})", table.get(j).unwrap(), esp_naive(&w, j)?);
    }
    for mu in [-0.4, 0.15] {
        for sign in [Sign::Long, Sign::Short] {
            println!(
                "mu={mu:+} {sign:?}: expansion {:.12}, product {:.12}",
                expected_growth_esp(&table, mu, sign),
                expected_growth_product(&w, mu, sign)
            );
        }
    }
    println!("e2 > 0 for [0.5, 0, 0]: {}", e2_positive(&[0.5, 0.0, 0.0])?);
    println!("e2 > 0 for [0.5, 0, 0.1]: {}", e2_positive(&[0.5, 0.0, 0.1])?);
    Ok(())
}
