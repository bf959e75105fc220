//! First-order plant with analytic gains, output limit 0.5 and control limit 1.
//!
//! `cargo run --example scalar_demo`

use cbf_servo::scenario::{bundled_source, parse_scenario};
use cbf_servo::sim;

fn main() -> cbf_servo::Result<()> {
    let sc = parse_scenario(bundled_source("scalar_demo").expect("bundled"))?;
    println!("K_I = {:.6}, K_P = {:.6} (sqrt(2) - 1 = {:.6})", sc.gains.k_i()[(0, 0)], sc.gains.k_p()[(0, 0)], 2f64.sqrt() - 1.0);
    let res = sim::run(&sc)?;
    for r in res.telemetry.records.iter().step_by(500) {
        println!(
            "t={:5.2}  y_cmd={:+.3}  y={:+.4}  u_cmd={:+.4}  v={:+.4}  w={:+.4}",
            r.t, r.y_cmd[0], r.y_reg[0], r.u_cmd[0], r.v[0], r.w[0]
        );
    }
    println!("peak |y| = {:.4} (limit 0.5)", res.metrics.max_abs_z_lim[0]);
    Ok(())
}
