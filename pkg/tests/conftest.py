ACCEPTANCE_FILE = "test_acceptance.py"


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and ACCEPTANCE_FILE in report.nodeid:
        label = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"[ACCEPTANCE {label}] {name}")
