fn main() {
    std::process::exit(freegig::cli::main_with_args(std::env::args_os()));
}
