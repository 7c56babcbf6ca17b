use std::process::ExitCode;

fn main() -> ExitCode {
    let (out, code) = chrdc::cli::execute(std::env::args_os());
    if code == chrdc::cli::EXIT_INPUT_ERROR {
        eprint!("{out}");
    } else {
        print!("{out}");
    }
    ExitCode::from(code as u8)
}
