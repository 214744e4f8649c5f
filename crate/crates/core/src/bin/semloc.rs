fn main() {
    std::process::exit(semloc::cli::run(std::env::args_os()));
}
