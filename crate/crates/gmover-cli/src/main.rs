fn main() {
    std::process::exit(gmover_cli::run(std::env::args_os()));
}
