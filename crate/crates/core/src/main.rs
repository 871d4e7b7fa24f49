fn main() {
    std::process::exit(subgauss::cli::run_cli(std::env::args_os()));
}
