fn main() {
    std::process::exit(attr_forge::cli::run(std::env::args_os()));
}
