fn main() {
    std::process::exit(sciner_core::cli::run(std::env::args_os()));
}
