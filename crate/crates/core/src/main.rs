fn main() {
    std::process::exit(exit_moments::cli::run(std::env::args_os()));
}
