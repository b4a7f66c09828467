fn main() {
    std::process::exit(nbvb::cli::main_with_args(std::env::args_os()));
}
