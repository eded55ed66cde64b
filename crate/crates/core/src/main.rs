fn main() {
    std::process::exit(sievekit::cli::dispatch(std::env::args_os()));
}
