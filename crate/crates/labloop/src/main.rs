fn main() {
    std::process::exit(labloop::cli::run(std::env::args_os()));
}
