fn main() {
    cbf_servo::cli::init_logging();
    let code = cbf_servo::cli::run_from_args(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
