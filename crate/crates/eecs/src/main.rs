fn main() {
    std::process::exit(eecs::cli::main_entry());
}
