fn main() {
    std::process::exit(xcf::cli::run_cli(std::env::args_os()));
}
