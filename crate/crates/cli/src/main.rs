fn main() {
    std::process::exit(lffc_cli::dispatch(std::env::args_os()));
}
