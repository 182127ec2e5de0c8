fn main() {
    std::process::exit(hesim_cli::run(std::env::args_os()));
}
