fn main() {
    let code = hyperkernel::cli::run(std::env::args_os());
    std::process::exit(code);
}
