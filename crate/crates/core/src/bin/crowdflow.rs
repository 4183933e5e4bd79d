fn main() {
    std::process::exit(crowdflow::cli::main());
}
