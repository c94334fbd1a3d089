fn main() {
    std::process::exit(splitop::cli::run_from_args(std::env::args_os()));
}
