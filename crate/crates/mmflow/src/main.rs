fn main() {
    std::process::exit(mmflow::cli::run(std::env::args().skip(1)));
}
