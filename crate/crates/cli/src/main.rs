fn main() {
    std::process::exit(mecplan_cli::run_from_args(std::env::args_os()));
}
