use clap::Parser;

use fbg_shape::cli::{run, Cli};
use fbg_shape::Error;

fn main() {
    let cli = Cli::parse();
    match run(cli, &mut std::io::stdout()) {
        Ok(()) => {}
        // Downstream reader closed the pipe (e.g. `| head`).
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
