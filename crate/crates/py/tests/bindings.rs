use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};
use pyo3::wrap_pymodule;

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::attach(|py| {
        let m = wrap_pymodule!(lowdeg_py::lowdeg_py)(py);
        f(m.bind(py).cast::<PyModule>().unwrap());
    });
}

#[test]
fn honest_table_round_trip() {
    with_module(|m| {
        let py = m.py();
        let kw = PyDict::new(py);
        kw.set_item("seed", 1).unwrap();
        let t = m.getattr("gen_table").unwrap().call((5, 3, 2, 1, "honest"), Some(&kw)).unwrap();
        assert_eq!(t.len().unwrap(), 155);
        let est = m.getattr("agreement").unwrap().call1((&t, "pxp")).unwrap();
        assert_eq!(est.get_item("value").unwrap().extract::<String>().unwrap(), "1/1");
        let json = t.call_method0("to_json").unwrap();
        let back = m.getattr("Table").unwrap().call_method1("from_json", (json,)).unwrap();
        let h1: String = t.call_method0("content_hash").unwrap().extract().unwrap();
        let h2: String = back.call_method0("content_hash").unwrap().extract().unwrap();
        assert_eq!(h1, h2);
    });
}

#[test]
fn errors_carry_exit_codes() {
    with_module(|m| {
        let err = m.getattr("spectral_report").unwrap().call1(("g1", 4, 2)).unwrap_err();
        let args = err.value(m.py()).getattr("args").unwrap();
        assert_eq!(args.get_item(1).unwrap().extract::<i32>().unwrap(), 2);
        let msg = args.get_item(0).unwrap();
        assert!(msg.cast::<PyString>().unwrap().to_str().unwrap().contains("m >= 6"));
        let err = m.getattr("agreement").unwrap();
        let kw = PyDict::new(m.py());
        kw.set_item("seed", 1).unwrap();
        let t = m.getattr("gen_table").unwrap().call((5, 3, 2, 1, "random"), Some(&kw)).unwrap();
        assert!(err.call1((&t, "pxp", "mc")).is_err());
    });
}

#[test]
fn spectral_report_is_a_dict() {
    with_module(|m| {
        let rep = m.getattr("spectral_report").unwrap().call1(("g6", 3, 2)).unwrap();
        let ls: f64 = rep.get_item("lambda_sq").unwrap().extract().unwrap();
        assert!((ls - 3.0 / 7.0).abs() < 1e-9);
    });
}
