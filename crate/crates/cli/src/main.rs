fn main() {
    std::process::exit(pml_cli::main_with_args(std::env::args_os()));
}
