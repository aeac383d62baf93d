use clap::Parser;

fn main() {
    let args = relent_core::cli::Args::parse();
    std::process::exit(relent_core::cli::run(&args));
}
