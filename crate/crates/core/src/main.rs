fn main() -> std::process::ExitCode {
    oue_core::cli::run(std::env::args_os())
}
