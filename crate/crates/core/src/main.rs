fn main() {
    let code = zcouple::cli::main_with_args(std::env::args().collect());
    std::process::exit(code);
}
