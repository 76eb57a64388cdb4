fn main() {
    std::process::exit(folkm::cli::run(std::env::args_os()));
}
