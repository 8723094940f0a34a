#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus_cli::config::CliConfig;

fuzz_target!(|data: &str| {
    let _ = toml::from_str::<CliConfig>(data);
});
