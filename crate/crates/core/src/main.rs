fn main() {
    std::process::exit(levicsl::cli::run(std::env::args_os()));
}
