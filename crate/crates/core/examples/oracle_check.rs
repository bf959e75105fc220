//! Closed-form multipliers against the active-set QP oracle, on one
//! coupled instance and a small random batch.
//!
//! `cargo run --release --example oracle_check`

use cbf_servo::numerics::Matrix;
use cbf_servo::verify::{run_verify, VerifyConfig};
use cbf_servo::{kkt_residual, oracle_solve, ConstraintMaps, MultiplierMode, QpInstance};

fn main() -> cbf_servo::Result<()> {
    let i = Matrix::identity(1);
    let maps = ConstraintMaps::new(i.clone(), i.clone(), i, 1.0, 1.0)?;
    let (dg, dh) = ([1.0, -1.0], [1.0, -1.0]);
    let inst = QpInstance::from_maps(&maps, &dg, &dh);
    let exact = oracle_solve(&inst)?;
    for mode in [MultiplierMode::Full, MultiplierMode::Exact] {
        let (v, w, mult) = maps.solve(&dg, &dh, mode);
        println!(
            "{:>5}: v={v:?} w={w:?} kkt={:.2e}",
            mode.as_str(),
            kkt_residual(&inst, &v, &w, &mult.lambda(), &mult.gamma())
        );
    }
    println!("oracle: v={:?} w={:?}", exact.v, exact.w);

    let report = run_verify(&VerifyConfig::new(7, 500))?;
    print!("{}", report.summary());
    Ok(())
}
