use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TDEC_LOG"))
        .format_timestamp(None)
        .init();
    let cli = tdec::cli::Cli::parse();
    std::process::exit(tdec::cli::run(cli));
}
