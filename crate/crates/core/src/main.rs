fn main() {
    std::process::exit(ddsim::cli::main_with_args(std::env::args_os()));
}
