fn main() {
    let code = forklab_cli::main_with(std::env::args().collect(), &mut std::io::stdout());
    std::process::exit(code);
}
