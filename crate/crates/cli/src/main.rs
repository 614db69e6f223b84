fn main() {
    std::process::exit(lumbarkit_cli::run(std::env::args_os()));
}
