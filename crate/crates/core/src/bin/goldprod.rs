fn main() {
    std::process::exit(goldprod::cli::run(std::env::args_os().skip(1)));
}
