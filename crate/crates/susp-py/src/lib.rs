use pyo3::prelude::*;

#[pymodule]
fn susp_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
