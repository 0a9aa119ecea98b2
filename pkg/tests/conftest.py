import pytest

from cfshap import kernels
from cfshap.kernels import _kernels_py

_available = {"python": _kernels_py}
try:
    from cfshap import _kernels as _compiled

    _available["compiled"] = _compiled
except ImportError:
    pass


@pytest.fixture(params=sorted(_available))
def kernel_backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", _available[request.param])
    return request.param
