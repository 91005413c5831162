//! Python bindings for the rggld toolkit.

use pyo3::prelude::*;

#[pymodule]
fn rggld_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
