fn main() {
    std::process::exit(gvqp_cli::run(std::env::args_os().collect()));
}
