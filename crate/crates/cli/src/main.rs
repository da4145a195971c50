fn main() {
    std::process::exit(planewarp_cli::run(std::env::args_os()));
}
