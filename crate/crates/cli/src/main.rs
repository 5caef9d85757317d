fn main() {
    std::process::exit(affectline_cli::run(std::env::args_os()));
}
