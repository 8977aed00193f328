fn main() {
    std::process::exit(boostvi::cli::main_with_args(std::env::args_os()));
}
