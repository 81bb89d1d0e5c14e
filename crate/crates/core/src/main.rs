use mixedgain::cli;

fn main() {
    std::process::exit(cli::run());
}
