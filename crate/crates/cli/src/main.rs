fn main() {
    std::process::exit(hybridcast::cli::main_with(std::env::args_os()));
}
