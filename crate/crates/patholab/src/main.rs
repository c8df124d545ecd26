fn main() {
    std::process::exit(patholab::cli::main_with(std::env::args_os()));
}
