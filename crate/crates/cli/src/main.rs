fn main() {
    std::process::exit(hopwheel_cli::main_with_args(std::env::args_os()));
}
