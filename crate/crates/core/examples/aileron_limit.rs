//! Roll-rate steps with the aileron held to ±4° and the rudder to ±2°,
//! with and without augmentation.
//!
//! `cargo run --release --example aileron_limit`

use cbf_servo::presets::{trade_study_scenario, TradeStudyCase};
use cbf_servo::sim;

fn main() -> cbf_servo::Result<()> {
    let sc = trade_study_scenario(TradeStudyCase::AileronLimit);
    let mut bare = sc.clone();
    bare.flags.augmentation = false;
    for (label, s) in [("augmented", &sc), ("baseline only", &bare)] {
        let m = sim::run(s)?.metrics;
        println!(
            "{label:>14}: max |u_cmd| {:.3}° / {:.3}°, max |p_s| {:.2} deg/s, max |e_yI| {:.4}, rms tracking {:.4}",
            m.max_abs_u_cmd[0].to_degrees(),
            m.max_abs_u_cmd[1].to_degrees(),
            m.max_abs_z_lim[0].to_degrees(),
            m.max_abs_integrator[0],
            m.rms_tracking_error[0]
        );
    }
    Ok(())
}
