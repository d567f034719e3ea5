fn main() {
    std::process::exit(proxjacobi::cli::run(std::env::args_os()));
}
