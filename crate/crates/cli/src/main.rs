fn main() {
    std::process::exit(esqr_cli::run(std::env::args_os()));
}
