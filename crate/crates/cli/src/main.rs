fn main() -> std::process::ExitCode {
    sarplan_cli::main_impl()
}
