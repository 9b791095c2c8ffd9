fn main() {
    std::process::exit(robust_families::cli::main_with_args(std::env::args_os()));
}
