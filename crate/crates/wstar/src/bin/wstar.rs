fn main() {
    let env_seed = std::env::var(wstar::cli::SEED_ENV).ok();
    std::process::exit(wstar::cli::run(std::env::args_os(), env_seed.as_deref()));
}
