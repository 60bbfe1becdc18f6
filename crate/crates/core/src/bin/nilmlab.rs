fn main() {
    std::process::exit(nilmlab::cli::run(std::env::args_os()));
}
