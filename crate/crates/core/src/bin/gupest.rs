fn main() {
    std::process::exit(gupest::cli::main_with_args(std::env::args().collect()));
}
