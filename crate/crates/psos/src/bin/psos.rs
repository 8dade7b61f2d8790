use std::process::exit;

fn main() {
    exit(psos::cli::cli_main(std::env::args_os()));
}
