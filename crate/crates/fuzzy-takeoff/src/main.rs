fn main() {
    std::process::exit(fuzzy_takeoff::cli::cli_main(std::env::args_os()));
}
