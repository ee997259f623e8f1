fn main() {
    std::process::exit(beamkit::cli::dispatch(std::env::args_os()));
}
