fn main() {
    std::process::exit(qticket::cli::run(std::env::args_os()));
}
