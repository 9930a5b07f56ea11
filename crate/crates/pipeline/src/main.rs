use clap::Parser;

fn main() {
    let cli = aoa_pipeline::cli::Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = aoa_pipeline::cli::run(&cli) {
        eprintln!("aoa: {e}");
        std::process::exit(e.exit_code());
    }
}
