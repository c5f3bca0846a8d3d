fn main() {
    std::process::exit(dwflow::cli::run(std::env::args_os()));
}
