fn main() {
    std::process::exit(phonon::cli::main_with_args(std::env::args_os()));
}
