fn main() {
    std::process::exit(g2flow_cli::run(std::env::args_os()));
}
