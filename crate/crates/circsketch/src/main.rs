fn main() {
    std::process::exit(circsketch::cli::run(std::env::args_os()));
}
