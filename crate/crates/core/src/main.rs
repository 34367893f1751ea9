fn main() {
    std::process::exit(eventum::cli::run_command(std::env::args_os()));
}
