use lcmst::cli::{execute, CliArgs};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parsed = match CliArgs::parse(&args) {
        Ok(parsed) => parsed,
        Err(msg) => {
            eprintln!("{msg}");
            std::process::exit(2);
        }
    };
    let (_, code) = execute(&parsed);
    std::process::exit(code);
}
