fn main() {
    std::process::exit(betadelta::main_with_args(std::env::args_os()));
}
