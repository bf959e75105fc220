//! Roll-rate limit ±18 deg/s against a ±40 deg/s command: integrator windup
//! of the bare baseline versus the augmented loop.
//!
//! `cargo run --release --example anti_windup`

use cbf_servo::presets::{trade_study_scenario, TradeStudyCase};
use cbf_servo::sim;

fn main() -> cbf_servo::Result<()> {
    for case in [TradeStudyCase::RollRateLimitBaseline, TradeStudyCase::RollRateLimitAugmented] {
        let res = sim::run(&trade_study_scenario(case))?;
        let p_at = |t: f64| {
            let r = res.telemetry.records.iter().find(|r| r.t >= t - 1e-9).unwrap();
            r.y_reg[0].to_degrees()
        };
        println!(
            "{:<24} peak |e_yI| {:.4}  max |p_s| {:6.2} deg/s  p_s at t=12,13,14: {:+.1} {:+.1} {:+.1}",
            case.slug(),
            res.metrics.max_abs_integrator[0],
            res.metrics.max_abs_z_lim[0].to_degrees(),
            p_at(12.0),
            p_at(13.0),
            p_at(14.0)
        );
    }
    Ok(())
}
