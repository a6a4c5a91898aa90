fn main() {
    std::process::exit(imbapipe::cli::main_with_args(std::env::args()));
}
