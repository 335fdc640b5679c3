fn main() {
    std::process::exit(evt_endpoint::cli::main_with_args(std::env::args_os()));
}
