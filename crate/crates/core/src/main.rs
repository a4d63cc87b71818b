fn main() {
    std::process::exit(qcalc::cli::main_with_args(std::env::args_os()));
}
