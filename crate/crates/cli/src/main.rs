fn main() {
    std::process::exit(plugflow_cli::run(std::env::args_os()));
}
