fn main() {
    std::process::exit(morale_cli::run(std::env::args_os()));
}
