fn main() {
    std::process::exit(pinlab::cli::run());
}
