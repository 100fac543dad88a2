fn main() {
    std::process::exit(sat2binpack::cli::run(std::env::args_os()));
}
