fn main() -> std::process::ExitCode {
    voxrestore::cli::main()
}
