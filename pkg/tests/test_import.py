"""Test importing the module."""

import exmart as xm


def test_import_package():
    assert xm
    assert xm.create_engine().np == 1
