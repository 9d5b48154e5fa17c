use clap::Parser;

fn main() {
    let cli = weylscat::cli::Cli::parse();
    std::process::exit(weylscat::cli::run(cli));
}
