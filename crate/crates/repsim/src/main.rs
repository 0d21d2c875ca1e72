fn main() {
    std::process::exit(repsim::cli::run());
}
