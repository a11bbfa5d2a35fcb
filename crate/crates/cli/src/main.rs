fn main() {
    std::process::exit(wave_mle_cli::main_with_args(std::env::args_os()));
}
