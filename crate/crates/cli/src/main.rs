fn main() {
    std::process::exit(dividend_cli::run(std::env::args_os()));
}
