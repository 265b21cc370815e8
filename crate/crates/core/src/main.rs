fn main() -> std::process::ExitCode {
    orthomoments::cli::main()
}
