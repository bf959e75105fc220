//! The five-case lateral trade study, written to a directory.
//!
//! `cargo run --release --example reproduce -- [out_dir]`

use std::path::PathBuf;

use cbf_servo::cli::{reproduce, RunOptions};
use cbf_servo::report::summary_table;

fn main() -> cbf_servo::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "reproduce".into()));
    let runs = reproduce(&dir, &RunOptions::default())?;
    let refs: Vec<_> = runs.iter().map(|(s, r)| (s, r)).collect();
    print!("{}", summary_table(&refs));
    println!("written to {}", dir.display());
    Ok(())
}
