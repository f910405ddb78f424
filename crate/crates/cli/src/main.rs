fn main() {
    std::process::exit(hopf_soliton_cli::run(std::env::args_os()));
}
