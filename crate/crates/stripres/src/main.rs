fn main() {
    std::process::exit(stripres::cli::run());
}
