fn main() {
    std::process::exit(freemix::cli::run(std::env::args_os()));
}
