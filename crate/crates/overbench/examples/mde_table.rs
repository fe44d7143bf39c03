//! How small a performance change can an environment detect, given its
//! noise level? Prints the minimal detectable relative change for a range
//! of relative standard deviations, in both formula modes.
//!
//! ```bash
//! cargo run --example mde_table
//! ```

use overbench::stats::{minimal_detectable_change, MdeConfig, MdeMode};

fn main() -> overbench::Result<()> {
    // (environment label, sigma as percent) — representative noise levels
    // from quiet bare metal up to a busy shared runner.
    let environments = [
        ("quiet bare metal", 0.11),
        ("desktop, light load", 0.16),
        ("desktop, background jobs", 0.87),
        ("shared CI runner", 1.97),
        ("noisy virtualized host", 4.15),
    ];

    println!("minimal detectable relative change at n = 10 loop starts");
    println!("(alpha = 1%, beta = 1%)");
    println!();
    println!("{:<28} {:>9} {:>13} {:>13}", "environment", "sigma", "table mode", "power mode");
    for (label, sigma_pct) in environments {
        let sigma = sigma_pct / 100.0;
        let table = minimal_detectable_change(sigma, &MdeConfig::default())?;
        let power = minimal_detectable_change(
            sigma,
            &MdeConfig {
                mode: MdeMode::TwoSamplePower,
                ..MdeConfig::default()
            },
        )?;
        println!(
            "{:<28} {:>8.2}% {:>12.2}% {:>12.2}%",
            label,
            sigma_pct,
            table * 100.0,
            power * 100.0
        );
    }

    println!();
    println!("more loop starts buy sensitivity in power mode (sigma fixed at 1.97%):");
    for n in [5, 10, 20, 50] {
        let delta = minimal_detectable_change(
            0.0197,
            &MdeConfig {
                n,
                mode: MdeMode::TwoSamplePower,
                ..MdeConfig::default()
            },
        )?;
        println!("  n = {n:>2}: {:>6.2}%", delta * 100.0);
    }
    Ok(())
}
