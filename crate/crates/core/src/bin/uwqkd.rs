fn main() {
    std::process::exit(uwqkd::cli::main_with_args(std::env::args_os()));
}
