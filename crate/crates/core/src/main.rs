fn main() {
    std::process::exit(longsynth::cli::run(std::env::args_os()));
}
