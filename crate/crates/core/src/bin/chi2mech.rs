fn main() { std::process::exit(chi2mech::cli::run(std::env::args_os())); }
