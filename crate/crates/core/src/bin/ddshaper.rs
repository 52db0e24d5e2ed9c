fn main() {
    std::process::exit(ddshaper::cli::main());
}
