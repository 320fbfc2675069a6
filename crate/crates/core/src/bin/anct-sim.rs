fn main() {
    std::process::exit(anct_core::cli::main_with_args(std::env::args_os()));
}
