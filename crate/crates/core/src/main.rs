fn main() {
    std::process::exit(tcs_loss::cli::run(std::env::args_os()));
}
