fn main() {
    std::process::exit(mvkit::cli::run(std::env::args_os()));
}
