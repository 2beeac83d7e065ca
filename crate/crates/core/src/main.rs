fn main() {
    std::process::exit(singular_arc::cli::run(std::env::args_os()));
}
