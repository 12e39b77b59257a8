fn main() {
    std::process::exit(wminav::cli::run(std::env::args_os()));
}
