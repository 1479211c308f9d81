fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = crashgraph::cli::main_with_args(std::env::args_os()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
