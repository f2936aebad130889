fn main() {
    std::process::exit(thouless_cli::app::main_with(std::env::args_os()));
}
