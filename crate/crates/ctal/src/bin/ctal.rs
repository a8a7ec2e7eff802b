fn main() {
    std::process::exit(ctal::cli::cli_main(std::env::args_os()));
}
