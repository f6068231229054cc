fn main() {
    std::process::exit(mpov_cli::run_cli(std::env::args_os()));
}
