fn main() -> std::process::ExitCode {
    mgtbench::cli::main()
}
