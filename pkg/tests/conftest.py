import numpy as np
import pytest

from amedet.corpus import annotations, corpus_files
from amedet.frontend import parse_source

WITHDRAW = """
contract Bank {
    mapping(address => uint) userBalance;

    function withdraw(uint amount) public {
        require(userBalance[msg.sender] >= amount);
        msg.sender.call.value(amount)();
        userBalance[msg.sender] -= amount;
    }
}
"""

SPIN = """
contract Looper {
    uint total;
    function spin() public {
        uint i = 0;
        while (i < 9) { total += 1; }
    }
}
"""


def parse_one(src, name=None):
    """Parse ``src`` and return (ir, contract index) for ``name`` or the only function."""
    unit = parse_source(src)
    ir = unit.find(name) if name else unit.functions[0]
    return ir, unit.index_for(ir)


def wrap(body, state="", header="function f(uint x, uint n) public"):
    return f"contract C {{\n{state}\n{header} {{\n{body}\n}}\n}}\n"


@pytest.fixture(scope="session")
def corpus_units():
    return {p.name: parse_source(p.read_text()) for p in corpus_files()}


@pytest.fixture(scope="session")
def corpus_annotations():
    return annotations()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
