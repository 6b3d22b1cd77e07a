fn main() {
    std::process::exit(assassin_cli::run(std::env::args_os()));
}
