fn main() {
    std::process::exit(nested_sta::cli::cli_main(std::env::args_os()));
}
