//! Native model format: JSON with sorted keys and 17-significant-digit numbers.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{validate_structure, ModelDoc, ModelError};

/// Pretty JSON formatter that prints every float with 17 significant digits.
struct SeventeenDigits<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes any value as pretty JSON with keys sorted and floats printed
/// with 17 significant digits. Shared by the model and report writers.
pub fn to_json_17<T: Serialize>(value: &T) -> String {
    // `serde_json::Value` objects are BTreeMaps, which sorts keys.
    let tree = serde_json::to_value(value).expect("model types serialize to JSON");
    let mut buf = Vec::new();
    let fmt = SeventeenDigits {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    tree.serialize(&mut ser)
        .expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn serialize_native_model(model: &ModelDoc) -> String {
    to_json_17(model)
}

/// Parses the native format and checks structural invariants.
pub fn load_native_model(text: &str) -> Result<ModelDoc, ModelError> {
    if text.trim().is_empty() {
        return Err(ModelError::Parse("empty document".into()));
    }
    let model: ModelDoc =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let report = validate_structure(&model);
    if !report.is_empty() {
        return Err(ModelError::InvariantViolation(report));
    }
    Ok(model)
}
