fn main() {
    std::process::exit(squeeze_sim::cli::run());
}
