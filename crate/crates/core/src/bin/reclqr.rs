fn main() {
    std::process::exit(reclqr_core::cli::run(std::env::args_os()));
}
