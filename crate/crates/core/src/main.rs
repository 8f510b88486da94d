fn main() {
    std::process::exit(paretomerge::cli::run(std::env::args_os()));
}
