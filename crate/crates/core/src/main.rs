fn main() {
    std::process::exit(xdis_core::cli::run(std::env::args_os()));
}
