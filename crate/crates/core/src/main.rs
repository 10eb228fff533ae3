fn main() { std::process::exit(emomask::cli::run_cli(std::env::args())) }
