fn main() {
    std::process::exit(editlab::cli::run());
}
