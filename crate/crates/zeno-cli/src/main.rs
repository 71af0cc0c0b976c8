fn main() {
    std::process::exit(zeno_cli::run_cli(std::env::args_os()));
}
