//! Writes telemetry to CSV and reads one column back.
//!
//! `cargo run --example telemetry_csv`

use cbf_servo::report::{read_csv_table, telemetry_header, write_telemetry_csv};
use cbf_servo::scenario::{bundled_source, parse_scenario};
use cbf_servo::sim;

fn main() -> cbf_servo::Result<()> {
    let sc = parse_scenario(bundled_source("scalar_demo").expect("bundled"))?;
    let res = sim::run(&sc)?;
    println!("columns: {}", telemetry_header(&res.telemetry).join(","));
    let mut buf = Vec::new();
    write_telemetry_csv(&mut buf, &res.telemetry)?;
    let table = read_csv_table(buf.as_slice())?;
    let u = table.column("u_cmd[1]").expect("u_cmd column");
    println!("{} rows, {} bytes, last value {:.6}", table.rows.len(), buf.len(), u.last().unwrap());
    Ok(())
}
