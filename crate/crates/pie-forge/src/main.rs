fn main() {
    std::process::exit(pie_forge::cli::run(std::env::args_os()));
}
