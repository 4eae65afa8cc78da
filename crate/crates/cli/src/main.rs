fn main() {
    std::process::exit(sojourn_cli::main_with_args(std::env::args_os()));
}
