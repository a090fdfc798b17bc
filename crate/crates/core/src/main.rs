fn main() {
    std::process::exit(lstp_nav::cli::run(std::env::args_os()));
}
