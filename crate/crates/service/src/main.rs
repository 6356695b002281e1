use clap::Parser;
use wrapped_haptics_service::cli::Cli;

fn main() {
    if let Err(e) = Cli::parse().run(&mut std::io::stdout()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
