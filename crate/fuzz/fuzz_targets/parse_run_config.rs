#![no_main]

use libfuzzer_sys::fuzz_target;
use qhdturb_cli::{parse_run_config, Command};

// First byte picks the command, the rest is the config file.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let command = Command::ALL[pick as usize % Command::ALL.len()];
    let _ = parse_run_config(command, text, &[]);
});
