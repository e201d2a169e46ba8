#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::fit::read_force_maps;

fuzz_target!(|data: &[u8]| {
    let _ = read_force_maps(data);
});
