fn main() -> std::process::ExitCode {
    charcorrect::cli::main()
}
