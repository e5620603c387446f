fn main() {
    std::process::exit(mka::cli::run_cli(std::env::args_os()));
}
