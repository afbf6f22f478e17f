fn main() {
    std::process::exit(slicedmk::cli::run(std::env::args_os()));
}
