fn main() {
    std::process::exit(ikh::cli::main_entry());
}
