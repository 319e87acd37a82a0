import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion.

    Call ``acceptance(n, title)`` first, then ``.detail(text)`` as checks
    accumulate; the line is marked PASS only if the test body finishes.
    """
    results = request.config.stash[_RESULTS]
    entry = {}

    def start(number, title):
        entry.update(number=number, title=title, details=[])
        return _Handle(entry)

    yield start
    if entry:
        failed = getattr(request.node, "_acceptance_failed", True)
        results[entry["number"]] = (entry["title"], not failed, "; ".join(entry["details"]))


class _Handle:
    def __init__(self, entry):
        self._entry = entry

    def detail(self, text):
        self._entry["details"].append(text)


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if report.when == "call":
        item._acceptance_failed = report.failed
    return report


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
