fn main() {
    if let Err(e) = scenred::cli::run(std::env::args_os()) {
        match e.downcast_ref::<clap::Error>() {
            Some(ce) => ce.exit(),
            None => {
                eprintln!("error: {e:#}");
                std::process::exit(1);
            }
        }
    }
}
