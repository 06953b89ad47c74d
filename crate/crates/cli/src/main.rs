fn main() {
    std::process::exit(obslab_cli::main_with_args(std::env::args_os()));
}
