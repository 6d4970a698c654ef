fn main() {
    std::process::exit(gmwmx::cli::run(std::env::args_os()));
}
