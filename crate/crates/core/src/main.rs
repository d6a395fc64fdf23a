fn main() {
    std::process::exit(wentzell::cli::run(std::env::args_os()));
}
