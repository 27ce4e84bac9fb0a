fn main() {
    std::process::exit(weyl_principal::cli::main_with_args(std::env::args_os()));
}
