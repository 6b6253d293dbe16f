fn main() {
    std::process::exit(mgkernel::cli::run(std::env::args_os()));
}
