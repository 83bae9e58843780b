fn main() {
    std::process::exit(rlp_cli::main_with_args(std::env::args_os()));
}
