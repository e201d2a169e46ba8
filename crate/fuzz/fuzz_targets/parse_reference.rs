#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::model::{parse_reference_model, CompiledModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parse_reference_model(text) {
        // Whatever the parser accepts must survive validation and compilation
        // without panicking.
        let _ = parsed.model.validate();
        let _ = CompiledModel::new(&parsed.model);
    }
});
