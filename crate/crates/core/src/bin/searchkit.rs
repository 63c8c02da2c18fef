fn main() {
    std::process::exit(searchkit::cli::main_with_args(std::env::args_os()));
}
