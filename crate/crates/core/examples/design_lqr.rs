//! Baseline PI design for the lateral aircraft model.
//!
//! `cargo run --example design_lqr`

use cbf_servo::presets::{lateral_plant, lateral_weights};
use cbf_servo::LqrDesign;

fn main() -> cbf_servo::Result<()> {
    let plant = lateral_plant();
    let design = LqrDesign::synthesize(&plant.build_extended_system(), &lateral_weights())?;
    println!("K_I = {:?}", design.gains.k_i());
    println!("K_P = {:?}", design.gains.k_p());
    println!("closed-loop real parts: {:.4?}", design.closed_loop_real_parts);
    println!("CARE residual: {:.2e}", design.care_residual);
    Ok(())
}
