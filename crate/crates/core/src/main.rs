use std::process::ExitCode;

fn main() -> ExitCode {
    krglm::cli::main()
}
