fn main() {
    std::process::exit(nsgap_cli::run(std::env::args_os()));
}
