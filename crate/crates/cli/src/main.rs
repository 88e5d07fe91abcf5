fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = lumiparam_cli::run(std::env::args());
    std::process::exit(result.exit_code);
}
