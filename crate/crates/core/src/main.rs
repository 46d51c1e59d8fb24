fn main() {
    std::process::exit(adaptrust::cli::run(std::env::args_os()));
}
