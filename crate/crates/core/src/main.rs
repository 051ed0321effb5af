fn main() {
    std::process::exit(probrep::cli::run(std::env::args_os()));
}
