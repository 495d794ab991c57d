fn main() {
    std::process::exit(hawkes_heston_cli::run(std::env::args_os()));
}
