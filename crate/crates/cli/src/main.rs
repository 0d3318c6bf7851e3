fn main() {
    std::process::exit(solarec_cli::run(std::env::args_os()));
}
