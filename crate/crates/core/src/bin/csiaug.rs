fn main() {
    std::process::exit(csiaug::cli::cmd_dispatch(std::env::args_os()));
}
