fn main() {
    std::process::exit(mixed_liouvillian::cli::main_with_args(std::env::args_os()));
}
