fn main() {
    std::process::exit(graynet::cli::run(std::env::args_os()));
}
