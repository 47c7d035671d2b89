use clap::Parser;

use resetq_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let (command, flags) = cli.command.into_parts();
    let code = match flags.resolve(command) {
        Ok(cfg) => run(&cfg, &mut std::io::stdout().lock(), &mut std::io::stderr().lock()),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
