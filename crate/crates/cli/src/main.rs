use std::process::ExitCode;

fn main() -> ExitCode {
    let (code, text) = secsamp_cli::execute(std::env::args_os());
    if code == secsamp_cli::EXIT_INPUT {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    ExitCode::from(code as u8)
}
