import pytest


@pytest.fixture
def report(request):
    """One-line PASS/FAIL reporter that reaches the terminal even under
    pytest's fd-level output capture."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def _report(name: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        if tr is not None:
            tr.write_line(line)
        else:
            print(line, flush=True)
        return ok

    return _report
