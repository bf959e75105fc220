//! Loading a scenario from TOML text, with limits in degrees.
//!
//! `cargo run --example scenario_file`

use cbf_servo::scenario::parse_scenario;
use cbf_servo::sim;

const TEXT: &str = r#"
name = "damped spring"

[plant]
a = [[0.0, 1.0], [-1.0, -0.5]]
b = [[0.0], [1.0]]
c_reg = [[1.0, 0.0]]
c_lim = [[0.0, 1.0]]

[limits]
u_max = [2.0]
z_max = [0.6]

[lqr]
q_diag = [4.0, 1.0, 0.0]
r_diag = [1.0]

[augmentation]
k_w = "4*Kp*Bp"

[commands]
steps = [[[0.0, 0.0], [1.0, 2.0]]]

[sim]
duration = 15.0
"#;

fn main() -> cbf_servo::Result<()> {
    let sc = parse_scenario(TEXT)?;
    println!("{}: K_I = {:?}", sc.name, sc.gains.k_i());
    let m = sim::run(&sc)?.metrics;
    println!("max |velocity| {:.4} (limit 0.6), max |u_cmd| {:.4} (limit 2)", m.max_abs_z_lim[0], m.max_abs_u_cmd[0]);
    println!("final position error {:.2e}", m.hold_end_errors[0].last().unwrap());

    match parse_scenario("name = \"x\"\n[plant]\na = 1\n") {
        Err(e) => println!("malformed file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
