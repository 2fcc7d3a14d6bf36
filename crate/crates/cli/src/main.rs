fn main() {
    std::process::exit(lingomerge_cli::run(std::env::args_os()));
}
