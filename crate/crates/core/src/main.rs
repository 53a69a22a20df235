fn main() {
    std::process::exit(ccmin::cli::run_from(std::env::args_os()));
}
