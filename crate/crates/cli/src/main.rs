use clap::Parser;
use glitchscope::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = glitchscope::run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(glitchscope::exit_code(&err));
    }
}
