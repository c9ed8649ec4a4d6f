fn main() {
    std::process::exit(ktram_cli::run(std::env::args_os()));
}
