import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("SFMGNET_CLI") or shutil.which("sfmg")
    if not path:
        pytest.skip("sfmg executable not available")
    return path


@pytest.fixture
def tiny_config():
    import sfmgnet

    c = sfmgnet.RunConfig()
    c.set("gen.runs", "3")
    c.set("gen.duration_s", "10")
    c.set("eval.runs", "2")
    c.set("train.max_epochs", "2")
    c.set("recomb.max_epochs", "2")
    c.set("train.max_samples_per_epoch", "300")
    return c
