fn main() {
    std::process::exit(qhdturb_cli::run(std::env::args_os()));
}
