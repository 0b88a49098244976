"""ctest entry point: runs the smoke tests, or reports a skip when the
extension module has not been installed."""

import pathlib
import sys

try:
    import rclab  # noqa: F401
except ImportError as e:
    print(f"rclab module not importable ({e}); install it with pip install --no-build-isolation .")
    sys.exit(77)

import pytest

sys.exit(pytest.main(["-q", "-p", "no:cacheprovider", str(pathlib.Path(__file__).parent)]))
