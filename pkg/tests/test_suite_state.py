from concurrent.futures import ThreadPoolExecutor

from curveflow.suite_state import SuiteState


def test_snapshot_sorts_checks_and_counts_failures():
    state = SuiteState()
    state.add_check(criterion=3, name="length_monotone", passed=True, observed=0.0, threshold=1e-10)
    state.add_check(criterion=1, name="area_conservation", passed=False, observed=2e-6, threshold=1e-8, detail="ellipse")

    snapshot = state.snapshot()

    assert snapshot["passed"] is False
    assert snapshot["total"] == 2
    assert snapshot["failed"] == 1
    assert [check["criterion"] for check in snapshot["checks"]] == [1, 3]
    assert state.failures()[0]["detail"] == "ellipse"


def test_empty_suite_passes():
    assert SuiteState().snapshot()["passed"]
    assert SuiteState().failures() == []
    assert SuiteState().snapshot()["total"] == 0


def test_run_summaries_are_copies():
    state = SuiteState()
    summary = {"terminal": {"kind": "Converged"}}
    state.set_run_summary("ellipse", summary)

    summary["terminal"]["kind"] = "BlowUp"
    returned = state.snapshot()["runs"]
    returned["ellipse"]["terminal"]["kind"] = "TimeLimit"

    assert state.snapshot()["runs"] == {"ellipse": {"terminal": {"kind": "Converged"}}}


def test_concurrent_checks_are_all_recorded():
    state = SuiteState()

    def worker(index: int) -> None:
        state.add_check(criterion=index % 10, name=f"check_{index}", passed=index % 7 != 0, observed=index, threshold=0)
        state.snapshot()

    with ThreadPoolExecutor(max_workers=16) as pool:
        list(pool.map(worker, range(200)))

    snapshot = state.snapshot()
    assert snapshot["total"] == 200
    assert snapshot["failed"] == len([index for index in range(200) if index % 7 == 0])
