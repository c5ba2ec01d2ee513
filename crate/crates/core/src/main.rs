fn main() {
    std::process::exit(pwdecay::cli::main_with(std::env::args_os()));
}
