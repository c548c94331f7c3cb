use clap::Parser;

use mimic_iv::cli::{exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                mimic_iv::Error::Invalid(diags) => {
                    eprintln!("error: invalid model specification");
                    for d in diags {
                        eprintln!("  {d}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            exit_code(&e)
        }
    };
    std::process::exit(code);
}
