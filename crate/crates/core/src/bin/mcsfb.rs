fn main() -> std::process::ExitCode {
    mcsfb::cli::main()
}
