fn main() {
    std::process::exit(rulebound::cli::run_cli(std::env::args_os()));
}
