fn main() {
    std::process::exit(blin::cli::run(std::env::args_os()));
}
