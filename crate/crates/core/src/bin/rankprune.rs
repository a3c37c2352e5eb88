fn main() {
    std::process::exit(rankprune::cli::main_with_args(std::env::args_os()));
}
