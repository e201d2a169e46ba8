#![no_main]

use libfuzzer_sys::fuzz_target;
use myoforge::model::{load_native_model, serialize_native_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = load_native_model(text) {
        let again = load_native_model(&serialize_native_model(&model)).expect("re-load of serialized model");
        assert_eq!(again, model);
    }
});
