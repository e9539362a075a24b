fn main() {
    std::process::exit(satprecode::cli::run_subcommand(std::env::args_os()));
}
