fn main() {
    std::process::exit(groupoid_cover::cli::run(std::env::args_os()));
}
