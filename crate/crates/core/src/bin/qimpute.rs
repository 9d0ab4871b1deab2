fn main() {
    std::process::exit(qimpute::cli::main_with_args(std::env::args_os()));
}
