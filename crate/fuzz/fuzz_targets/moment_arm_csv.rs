#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::geometry::MomentArmMap;

fuzz_target!(|data: &[u8]| {
    let _ = MomentArmMap::read_csv(data);
});
