fn main() {
    std::process::exit(trapsense::cli::main_with_args(std::env::args_os()));
}
