fn main() {
    std::process::exit(rwdiff::cli::run(std::env::args_os()));
}
