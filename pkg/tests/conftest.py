import pytest

from xbridge.model import Address, Call, LogEntry, Side, TransactionInstance
from xbridge.simulator import clean_config, decoy_config, generate


def make_tx(
    n: int,
    *,
    side=Side.SOURCE,
    chain=1,
    timestamp=1_000,
    call=None,
    logs=(),
    value=0,
    sender=b"\x01" * 20,
    contract=b"\x02" * 20,
):
    """Small hand-built instance; ``n`` seeds the hash."""
    if isinstance(call, dict):
        call = Call("go", call)
    return TransactionInstance(
        chain=chain,
        tx_hash=n.to_bytes(32, "big"),
        block_number=n,
        timestamp=timestamp,
        sender=Address(sender),
        contract=Address(contract),
        native_value=value,
        call=call,
        logs=tuple(logs),
        side=side,
    )


def log(event, args, address=b"\x03" * 20, schema="()"):
    return LogEntry(event, Address(address), args, schema)


@pytest.fixture(scope="session")
def clean_small():
    return generate(clean_config(seed=11, n_transfers=600))


@pytest.fixture(scope="session")
def decoy_small():
    return generate(decoy_config(seed=12, n_transfers=800))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
