fn main() {
    std::process::exit(mangle_lab::cli::run(std::env::args_os()));
}
