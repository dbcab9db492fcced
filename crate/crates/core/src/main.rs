fn main() {
    std::process::exit(rydberg_dark::cli::main_with_args(std::env::args_os()));
}
