fn main() {
    std::process::exit(qslq::cli::main_with_args(std::env::args().collect()));
}
