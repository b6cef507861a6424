use std::io::Write;

fn main() {
    if let Err(e) = pencil_maslov::cli::configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = pencil_maslov::cli::run_from(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    std::process::exit(code);
}
