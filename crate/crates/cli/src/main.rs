use clap::Parser;

fn main() {
    let cli = quant8_cli::Cli::parse();
    if let Err(err) = quant8_cli::execute(&cli) {
        // One line, machine-parseable: error[CODE]: chain of causes.
        let code = err
            .downcast_ref::<quant8::Error>()
            .map(|e| e.code())
            .unwrap_or("CLI");
        eprintln!("error[{code}]: {err:#}");
        std::process::exit(1);
    }
}
