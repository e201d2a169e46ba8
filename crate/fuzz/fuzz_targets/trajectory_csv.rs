#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::dynamics::Trajectory;

fuzz_target!(|data: &[u8]| {
    let _ = Trajectory::read_csv(data);
});
