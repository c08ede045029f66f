fn main() {
    std::process::exit(ofnn::cli::main());
}
