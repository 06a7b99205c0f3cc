fn main() {
    std::process::exit(piostack::cli::run(std::env::args_os()));
}
