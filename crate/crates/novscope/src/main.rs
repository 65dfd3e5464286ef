fn main() {
    std::process::exit(novscope::cli::main_with_args(std::env::args_os()));
}
