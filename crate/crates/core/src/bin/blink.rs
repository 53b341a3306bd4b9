fn main() {
    std::process::exit(blink::cli::main_with_args(std::env::args_os()));
}
