fn main() {
    std::process::exit(monoreg::cli::main_with(std::env::args_os()));
}
