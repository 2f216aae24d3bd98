fn main() {
    std::process::exit(spic::cli::run(std::env::args_os()));
}
