fn main() {
    std::process::exit(pedkit::cli::cli_dispatch(std::env::args_os()));
}
