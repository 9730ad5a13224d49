fn main() {
    std::process::exit(qlh_cli::run(std::env::args_os()));
}
