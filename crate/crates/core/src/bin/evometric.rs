fn main() {
    std::process::exit(evometric::cli::main_with_args(std::env::args_os()));
}
