fn main() {
    std::process::exit(ftc_isotopy::cli_io::main_entry());
}
