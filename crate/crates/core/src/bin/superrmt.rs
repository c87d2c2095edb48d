fn main() {
    std::process::exit(superrmt::cli::run(std::env::args().collect()));
}
