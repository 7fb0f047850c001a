fn main() {
    std::process::exit(hybridrl::harness::cli::main_with_args(std::env::args_os()));
}
