use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("MYOFORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(myoforge_cli::run_cli(std::env::args_os()));
}
