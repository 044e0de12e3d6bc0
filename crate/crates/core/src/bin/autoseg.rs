fn main() {
    std::process::exit(autoseg::cli::run());
}
