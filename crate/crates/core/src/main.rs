fn main() {
    std::process::exit(geospread::cli::run(std::env::args_os()));
}
