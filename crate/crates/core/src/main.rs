fn main() {
    std::process::exit(kacgas::cli::run(std::env::args_os()));
}
