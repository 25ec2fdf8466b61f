import functools

import pytest

from linkalg.config import build
from linkalg.plts import explore
from linkalg.scenarios import hidden_station

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (title, ok, detail)
    print(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))


@functools.lru_cache(maxsize=None)
def hidden_plts(protocol: str, horizon: int = 30, por: bool = True):
    cfg = hidden_station(protocol, horizon=horizon).with_updates(por=por)
    built = build(cfg)
    return cfg, built, explore(built.model, built.root, horizon)


@pytest.fixture(scope="session")
def hidden_csma():
    return hidden_plts("csma")


@pytest.fixture(scope="session")
def hidden_rts():
    return hidden_plts("csma-rts")
