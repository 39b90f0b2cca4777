//! Runs python/smoke_test.py against the module embedded in a fresh interpreter.

use std::ffi::CString;

use pyo3::prelude::*;

#[test]
fn python_smoke_script() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../python/smoke_test.py");
    let code = std::fs::read_to_string(path).unwrap();
    Python::attach(|py| {
        lrex_py::register(py).unwrap();
        let code = CString::new(code).unwrap();
        let run = py.run(&code, None, None).and_then(|_| {
            let main = py.import("__main__")?;
            main.getattr("main")?.call0().map(|_| ())
        });
        if let Err(e) = run {
            e.print(py);
            panic!("smoke script failed: {e}");
        }
    });
}
