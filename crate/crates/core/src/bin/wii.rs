fn main() {
    std::process::exit(wii_core::cli::run(std::env::args_os()));
}
