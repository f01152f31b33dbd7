import pytest

from rulelink.graph import KnowledgeGraph


def write_triples(path, triples):
    path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in triples), encoding="utf-8")
    return path


@pytest.fixture
def toy_graph():
    # s(a,b), s(b,c), r(a,c), s(a,d)
    return KnowledgeGraph([("a", "s", "b"), ("b", "s", "c"), ("a", "r", "c"), ("a", "s", "d")])


@pytest.fixture
def chain_graph():
    # same as toy_graph without r(a,c); r only appears in valid
    return KnowledgeGraph([("a", "s", "b"), ("b", "s", "c"), ("a", "s", "d")],
                          valid=[("a", "r", "c")])


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
