fn main() {
    std::process::exit(mfuse::cli::run(std::env::args_os()));
}
