fn main() -> std::process::ExitCode {
    fourthdown::cli::run(std::env::args_os())
}
