fn main() {
    std::process::exit(issue_triage::cli::dispatch(std::env::args_os()));
}
