fn main() {
    std::process::exit(fluctlab::cli::main_entry());
}
