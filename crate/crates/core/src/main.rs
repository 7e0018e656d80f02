fn main() {
    std::process::exit(qkdlab::cli::main_with_args(std::env::args_os()));
}
