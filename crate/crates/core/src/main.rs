fn main() {
    if let Ok(text) = std::env::var("QLSU_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(qlsu::cli::run_command(std::env::args_os()));
}
