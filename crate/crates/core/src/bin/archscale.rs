fn main() {
    std::process::exit(archscale::cli::main_exit_code());
}
