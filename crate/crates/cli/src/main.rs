fn main() {
    std::process::exit(hidden_causes_cli::run(std::env::args_os()));
}
