"""Synthetic labeled Solidity functions.

Each vulnerability has a handful of risky and safe templates. A sample picks
a label, then a template of that class, fills in random identifiers and
sprinkles label-irrelevant noise statements between the template's
top-level statements.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .patterns import Vulnerability

NOISE_RATE = 0.10

_BALANCES = ("balances", "userBalance", "balanceOf", "tokenBalance", "etherBalance")
_FUNCS = ("withdraw", "claim", "payout", "collect", "settle", "redeem", "process", "run", "step", "tick")


@dataclass(frozen=True)
class GeneratedFunction:
    name: str
    source: str
    label: int
    template: str
    vulnerability: str


def _noise(rng: random.Random, param: str, k: int) -> str:
    kind = rng.randrange(3)
    if kind == 0:
        return f"uint tmp{k} = {rng.randint(2, 99)} * {param};"
    if kind == 1:
        return f"emit Trace{k}({param});"
    return f"bool flag{k} = {param} > {rng.randint(0, 50)};"


# Each template: (name, label, state declarations, parameter list, body statements).
# Bodies are lists of top-level statement strings; {B}, {F} etc. are substituted.

_REENTRANCY = [
    ("check-call-deduct", 1, ["mapping(address => uint) {B};"], "uint amount", [
        "require({B}[msg.sender] >= amount);",
        "msg.sender.call.value(amount)();",
        "{B}[msg.sender] -= amount;",
    ]),
    ("guarded-call-deduct", 1, ["mapping(address => uint) {B};"], "uint amount", [
        "if ({B}[msg.sender] >= amount) { (bool ok, ) = msg.sender.call.value(amount)(\"\"); require(ok); "
        "{B}[msg.sender] = {B}[msg.sender] - amount; }",
    ]),
    ("call-sub", 1, ["mapping(address => uint) {B};"], "uint amount", [
        "require(amount <= {B}[msg.sender]);",
        "require(msg.sender.call.value(amount)());",
        "{B}[msg.sender] = {B}[msg.sender].sub(amount);",
    ]),
    ("call-options-deduct", 1, ["mapping(address => uint) {B};"], "uint amount", [
        "(bool sent, ) = msg.sender.call{value: amount}(\"\");",
        "require(sent);",
        "{B}[msg.sender] -= amount;",
    ]),
    ("deduct-then-call", 0, ["mapping(address => uint) {B};"], "uint amount", [
        "require({B}[msg.sender] >= amount);",
        "{B}[msg.sender] -= amount;",
        "msg.sender.call.value(amount)();",
    ]),
    ("deduct-then-transfer", 0, ["mapping(address => uint) {B};"], "uint amount", [
        "require({B}[msg.sender] >= amount);",
        "{B}[msg.sender] -= amount;",
        "msg.sender.transfer(amount);",
    ]),
    ("internal-move", 0, ["mapping(address => uint) {B};"], "address to, uint amount", [
        "require({B}[msg.sender] >= amount);",
        "{B}[msg.sender] -= amount;",
        "{B}[to] += amount;",
    ]),
    ("fee-call", 0, ["address owner;", "uint fees;"], "uint amount", [
        "require(msg.sender == owner);",
        "owner.call.value(amount)();",
    ]),
    ("transfer-then-deduct", 0, ["mapping(address => uint) {B};"], "uint amount", [
        "msg.sender.transfer(amount);",
        "{B}[msg.sender] -= amount;",
    ]),
]

_TIMESTAMP = [
    ("deadline-transfer", 1, ["uint deadline;"], "uint amount", [
        "require(now >= deadline);",
        "msg.sender.transfer(amount);",
    ]),
    ("lottery-local", 1, ["address winner;"], "uint amount", [
        "uint t = block.timestamp;",
        "if (t % 15 == 0) { msg.sender.transfer(amount); }",
    ]),
    ("end-state", 1, ["uint endTime;", "bool ended;"], "uint amount", [
        "if (block.timestamp > endTime) { ended = true; }",
    ]),
    ("hash-seed", 1, [], "uint amount", [
        "uint seed = uint(keccak256(abi.encodePacked(block.timestamp, msg.sender)));",
        "if (seed % 2 == 0) { msg.sender.transfer(amount); }",
    ]),
    ("block-number", 1, ["uint jackpot;"], "uint amount", [
        "if (block.number % 10 == 0) { jackpot = 0; msg.sender.transfer(amount); }",
    ]),
    ("log-time", 0, ["mapping(address => uint) deposits;"], "uint amount", [
        "emit Deposit(msg.sender, amount, block.timestamp);",
        "deposits[msg.sender] += amount;",
    ]),
    ("record-time", 0, ["uint lastUpdate;"], "uint amount", [
        "lastUpdate = now;",
    ]),
    ("no-time", 0, ["uint total;"], "uint amount", [
        "require(amount > 0);",
        "total += amount;",
    ]),
    ("unused-time", 0, [], "uint amount", [
        "uint t = now;",
        "require(amount > 0);",
        "msg.sender.transfer(amount);",
    ]),
    ("time-event", 0, ["uint start;"], "uint amount", [
        "if (now > start) { emit Tick(now); }",
    ]),
]

_LOOP = [
    ("stuck-while", 1, ["uint total;"], "uint n", [
        "uint i = 0;",
        "while (i < n) { total += i; }",
    ]),
    ("no-update-for", 1, ["uint total;", "uint[] data;"], "uint n", [
        "for (uint i = 0; i < n; ) { total += data[i]; }",
    ]),
    ("while-true", 1, ["uint counter;"], "uint n", [
        "while (true) { counter++; }",
    ]),
    ("unguarded-recursion", 1, ["uint total;"], "uint n", [
        "total += n;",
        "{F}(n);",
    ]),
    ("wrong-update-for", 1, ["uint total;"], "uint n", [
        "uint j = 0;",
        "for (uint i = 0; i < n; j++) { total += i; }",
    ]),
    ("counted-for", 0, ["uint total;"], "uint n", [
        "for (uint i = 0; i < n; i++) { total += i; }",
    ]),
    ("counted-while", 0, ["uint total;"], "uint n", [
        "uint i = 0;",
        "while (i < n) { total += i; i++; }",
    ]),
    ("guarded-recursion", 0, ["uint total;"], "uint n", [
        "if (n > 0) { {F}(n - 1); }",
    ]),
    ("straight-line", 0, ["uint total;"], "uint n", [
        "total += n;",
    ]),
    ("do-while", 0, ["uint total;"], "uint n", [
        "do { n--; total++; } while (n > 0);",
    ]),
]

TEMPLATES = {
    Vulnerability.REENTRANCY: _REENTRANCY,
    Vulnerability.TIMESTAMP: _TIMESTAMP,
    Vulnerability.LOOP: _LOOP,
}


def _fill(text: str, subs: dict) -> str:
    for k, v in subs.items():
        text = text.replace("{" + k + "}", v)
    return text


def render(vulnerability, template, rng: random.Random, noise_rate: float = NOISE_RATE, name=None) -> GeneratedFunction:
    tname, label, state, params, body = template
    fname = name or f"{rng.choice(_FUNCS)}{rng.randint(0, 999)}"
    subs = {"B": rng.choice(_BALANCES), "F": fname}
    param = params.split()[-1]
    stmts = []
    for k, st in enumerate(body):
        stmts.append(_fill(st, subs))
        if rng.random() < noise_rate:
            stmts.append(_noise(rng, param, k))
    if rng.random() < noise_rate:
        stmts.insert(0, _noise(rng, param, len(body)))
    decls = "".join(f"    {_fill(s, subs)}\n" for s in state)
    lines = "".join(f"        {s}\n" for s in stmts)
    source = (
        f"contract Gen_{fname} {{\n{decls}"
        f"    function {fname}({params}) public {{\n{lines}    }}\n}}\n"
    )
    vuln = Vulnerability.parse(vulnerability)
    return GeneratedFunction(fname, source, label, tname, vuln.value)


def generate(vulnerability, n: int = 500, seed: int = 0, noise_rate: float = NOISE_RATE) -> list[GeneratedFunction]:
    """``n`` labeled functions with balanced classes, deterministic in ``seed``."""
    vuln = Vulnerability.parse(vulnerability)
    rng = random.Random(f"{vuln.value}:{seed}")
    by_label = {0: [], 1: []}
    for t in TEMPLATES[vuln]:
        by_label[t[1]].append(t)
    out = []
    for i in range(n):
        label = i % 2
        out.append(render(vuln, rng.choice(by_label[label]), rng, noise_rate, name=f"{rng.choice(_FUNCS)}{i}"))
    rng.shuffle(out)
    return out
