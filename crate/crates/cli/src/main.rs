fn main() {
    std::process::exit(covshift_cli::main_with_args(std::env::args_os()));
}
