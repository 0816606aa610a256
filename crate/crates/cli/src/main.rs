fn main() {
    std::process::exit(stylespace_cli::run(std::env::args_os()));
}
