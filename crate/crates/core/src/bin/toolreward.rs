fn main() {
    std::process::exit(toolreward::cli::main());
}
