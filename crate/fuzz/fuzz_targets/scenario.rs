#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::scenario::ScenarioSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ScenarioSpec::from_json(text);
});
