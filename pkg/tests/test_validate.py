from ghostbohm import validate


def test_registry_covers_every_module():
    names = [n for n, *_ in validate.REGISTRY]
    assert len(names) == len(set(names))
    assert {m for _, m, _, _ in validate.REGISTRY} == {"model", "evolve", "trajectories", "diagnostics", "cli-io"}


def test_negative_control_detects_perturbation():
    (res,) = validate.run_checks(["rigid_negative_control"])
    assert res.passed
    assert res.value[0] > 1e-4


def test_hbar_does_not_change_rigid_label():
    (res,) = validate.run_checks(["hbar_label_invariance"])
    assert res.passed and res.value == "rigid-transport"


def test_fresh_build_all_checks_pass(tmp_path):
    ok, results = validate.validate(tmp_path / "summary.json")
    failed = [(r.name, r.value) for r in results if not r.passed]
    assert (tmp_path / "summary.json").exists()
    assert ok, f"failed checks: {failed}"
