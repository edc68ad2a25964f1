fn main() {
    std::process::exit(wsnloc::cli::run(std::env::args_os()));
}
