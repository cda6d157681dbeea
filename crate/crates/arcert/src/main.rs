fn main() {
    std::process::exit(arcert::cli::run(std::env::args_os()));
}
