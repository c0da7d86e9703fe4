use clap::Parser;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    phonefuse::cli::run(phonefuse::cli::Cli::parse())?;
    Ok(())
}
