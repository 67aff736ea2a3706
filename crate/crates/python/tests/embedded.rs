use pyo3::prelude::*;

use isovol_py::isovol_py;

#[test]
fn module_imports_and_runs() {
    pyo3::append_to_inittab!(isovol_py);
    Python::attach(|py| {
        py.run(
            cr#"
import math
import isovol

assert abs(isovol.closed_form_volume("rp", 2) - 2 * math.pi) < 1e-12
est = isovol.mc_expected_count(1, 2, 500, 42)
assert est.histogram == {1: 500}, est.histogram
value, low, high = est.volume()
assert abs(value - 2 * math.pi) < 1e-9 and low == high == value
assert est.minimization()[0]

g = isovol.GroupElement.sample_unitary(3, 7, 0)
assert g.unitarity_defect() < 1e-12
v = g.apply([1, 0, 0])
assert abs(sum(abs(z) ** 2 for z in v) - 1) < 1e-12
assert isovol.fs_distance([1, 0, 0], [1j, 0, 0]) < 1e-12

assert isovol.count_real_roots([-1.0, 0.0, 1.0]) == (2, True)
assert isovol.count_real_roots([1.0, 0.0, 1.0]) == (0, True)

spec = isovol.HamiltonianSpec.from_json('{"family": "constant", "c": 2.0}')
run = isovol.integrate_flow(spec, mesh_scale=16, dt=0.01)
assert max(abs(v - run.projected_volumes[0]) for v in run.projected_volumes) < 1e-12
assert run.minimization_holds

try:
    isovol.mc_expected_count(2, 3, 500, 1)
except ValueError:
    pass
else:
    raise AssertionError("expected ValueError")
"#,
            None,
            None,
        )
        .map_err(|e| e.display(py))
        .unwrap();
    });
}
