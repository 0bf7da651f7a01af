fn main() {
    std::process::exit(bintrack::cli::run(std::env::args_os()));
}
