use mapbench_core::mock::{self, MockEnv};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match MockEnv::from_env(&args).and_then(|env| mock::run(&env)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mock-adapter: {e}");
            2
        }
    };
    std::process::exit(code);
}
