fn main() {
    std::process::exit(spermflow::cli::run());
}
