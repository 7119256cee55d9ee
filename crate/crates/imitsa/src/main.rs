use clap::Parser;

use imitsa::cli::{self, Cli, Command};

fn main() {
    let args = Cli::parse();
    let code = match dispatch(args) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

fn dispatch(args: Cli) -> Result<bool, imitsa::Error> {
    match args.command {
        Command::Simulate(run) => {
            cli::cmd_simulate(&cli::parse_config(&run)?)?;
            Ok(true)
        }
        Command::Dynamics(run) => {
            cli::cmd_dynamics(&cli::parse_config(&run)?)?;
            Ok(true)
        }
        Command::Ne(run) => {
            cli::cmd_ne(&cli::parse_config(&run)?)?;
            Ok(true)
        }
        Command::Phase(run) => {
            cli::cmd_phase(&cli::parse_config(&run)?)?;
            Ok(true)
        }
        Command::Reproduce(args) => cli::cmd_reproduce(&args.out),
    }
}
