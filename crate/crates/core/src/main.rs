fn main() {
    std::process::exit(bpire::cli::main_with_args(std::env::args_os()));
}
