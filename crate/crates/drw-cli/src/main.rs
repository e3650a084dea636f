use clap::Parser;

fn main() {
    let cli = drw_cli::Cli::parse();
    match drw_cli::run(&cli) {
        Ok(output) => {
            if let Some(path) = drw_cli::out_path(&cli) {
                if let Err(e) = std::fs::write(path, &output) {
                    eprintln!("error: cannot write {path}: {e}");
                    std::process::exit(3);
                }
            } else {
                print!("{output}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(drw_cli::exit_code(&e));
        }
    }
}
