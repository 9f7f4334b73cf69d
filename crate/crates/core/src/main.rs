fn main() {
    mdnc::cli::init_logging();
    std::process::exit(mdnc::cli::main_with_args(std::env::args_os()));
}
