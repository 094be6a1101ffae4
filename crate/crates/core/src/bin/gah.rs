fn main() {
    std::process::exit(gah::cli::run(std::env::args_os()));
}
