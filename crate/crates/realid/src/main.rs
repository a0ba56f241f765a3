fn main() {
    std::process::exit(realid::cli::run(std::env::args_os()));
}
