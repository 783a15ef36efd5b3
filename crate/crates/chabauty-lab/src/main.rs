fn main() {
    std::process::exit(chabauty_lab::cli::run(std::env::args_os()));
}
