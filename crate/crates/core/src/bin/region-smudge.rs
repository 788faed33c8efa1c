fn main() {
    std::process::exit(region_smudge::cli::run(std::env::args_os()));
}
