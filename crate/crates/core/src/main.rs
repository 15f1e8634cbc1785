fn main() {
    std::process::exit(randkern::cli::main(std::env::args_os()));
}
