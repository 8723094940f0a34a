fn main() {
    std::process::exit(prefcorpus_cli::run(std::env::args_os()));
}
