fn main() {
    std::process::exit(mhpinn::cli::dispatch(std::env::args_os()));
}
