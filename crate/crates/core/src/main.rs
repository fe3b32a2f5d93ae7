fn main() {
    std::process::exit(fracns::cli::main_with_args(std::env::args_os()));
}
