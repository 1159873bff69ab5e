import pytest

import kernelweave as kw


@pytest.fixture(scope="session")
def serial_backend():
    with kw.SerialBackend() as b:
        yield b


@pytest.fixture(scope="session")
def blockpool_backend():
    with kw.BlockPoolBackend(workers=4) as b:
        yield b


@pytest.fixture(scope="session")
def coop_backend():
    with kw.CooperativeBlockThreadsBackend(workers=4) as b:
        yield b


@pytest.fixture(scope="session")
def all_backends(serial_backend, blockpool_backend, coop_backend):
    return [serial_backend, blockpool_backend, coop_backend]
