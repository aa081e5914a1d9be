fn main() {
    std::process::exit(factorforge::cli::main_exit_code());
}
