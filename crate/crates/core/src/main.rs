fn main() {
    std::process::exit(bodylink::cli::main_with_args(std::env::args_os()));
}
