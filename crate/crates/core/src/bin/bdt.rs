fn main() {
    std::process::exit(bdt::cli::main_entry());
}
