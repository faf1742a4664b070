use pyo3::prelude::*;
use pyo3::types::PyModule;
use std::ffi::CString;

/// Run `code` with the module importable as `conflictsync`.
fn run(code: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "conflictsync").unwrap();
        conflictsync::register(&m).unwrap();
        py.import("sys").unwrap().getattr("modules").unwrap().set_item("conflictsync", &m).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.display(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn gset_lattice_ops() {
    run(r#"
import conflictsync as cs
a = cs.GSet([b"x", "y"])
b = cs.GSet(["y", "z"])
j = a.join(b)
assert len(j) == 3 and b"z" in j and "x" in j
assert a.leq(j) and not j.leq(a)
assert a.delta(b).items() == [b"x"]
assert j == b.join(a)
assert j.payload_bytes() == 3
try:
    cs.GSet([1])
    raise AssertionError("int accepted")
except TypeError:
    pass
"#);
}

#[test]
fn every_standard_algorithm_converges() {
    run(r#"
import conflictsync as cs
a, b = cs.generate_pair(500, 0.6, seed=3)
union = a.join(b)
grid = cs.Algorithm.standard_grid()
assert len(grid) == 19
for algo in grid:
    rep, fa, fb = cs.run_session(algo, a, b, seed=1)
    assert rep.converged and fa == union and fb == union, str(algo)
    d = rep.to_dict()
    assert d["total_bytes"] == d["metadata_bytes"] + d["redundant_bytes"] + d["necessary_bytes"]
"#);
}

#[test]
fn invalid_parameters_raise_value_error() {
    run(r#"
import conflictsync as cs
for args in [("Nope",), ("BlBu", 2.0, 1.0), ("Bu", None, -1.0)]:
    try:
        cs.Algorithm(*args)
        raise AssertionError(args)
    except ValueError:
        pass
try:
    cs.generate_pair(10, 1.5)
    raise AssertionError("similarity accepted")
except ValueError:
    pass
"#);
}

#[test]
fn bloom_and_reconcile() {
    run(r#"
import conflictsync as cs
f = cs.BloomFilter(100, 0.01)
for i in range(100):
    f.insert(str(i))
assert all(str(i) in f for i in range(100))
g = cs.BloomFilter.from_bytes(f.to_bytes())
assert len(f.to_bytes()) == f.wire_len() and g.num_bits == f.num_bits
local = [cs.digest(str(i).encode()) for i in range(0, 300)]
remote = [cs.digest(str(i).encode()) for i in range(20, 330)]
r_only, l_only, used = cs.reconcile(local, remote)
assert sorted(r_only) == sorted(set(remote) - set(local))
assert sorted(l_only) == sorted(set(local) - set(remote))
assert used < 200
assert len(cs.coded_symbols(remote, 5)) == 5
"#);
}
