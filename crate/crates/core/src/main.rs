fn main() {
    std::process::exit(softdeadline::cli::main());
}
