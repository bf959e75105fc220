//! Aileron ±4° and rudder ±1°: both channels saturate while the lateral
//! acceleration stays small.
//!
//! `cargo run --release --example two_channel`

use cbf_servo::presets::{trade_study_scenario, TradeStudyCase};
use cbf_servo::sim;

fn main() -> cbf_servo::Result<()> {
    let sc = trade_study_scenario(TradeStudyCase::TwoChannelSaturation);
    let res = sim::run(&sc)?;
    let m = &res.metrics;
    for (i, name) in res.telemetry.input_names.iter().enumerate() {
        println!(
            "{name}: peak |u_cmd| {:.3}° of ±{:.1}°",
            m.max_abs_u_cmd[i].to_degrees(),
            sc.limits.u_max[i].to_degrees()
        );
    }
    println!("max |N_y| = {:.4} g", m.max_abs_y_reg[1]);
    Ok(())
}
