fn main() {
    std::process::exit(macmem::cli::main_with_args(std::env::args().collect()));
}
