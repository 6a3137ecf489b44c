import configparser
import textwrap

import pytest

IDEAL = """
[experiment]
seed = {seed}
n_emissions = {n}
[emitter]
collection_efficiency = 1
[channel]
chip_transmission = 1
jitter_sigma_ns = {jitter}
dark_rate_per_ns = {dark}
dead_time_ns = 0
[report]
figures = no
"""


@pytest.fixture
def write_config(tmp_path):
    """Write an ideal-channel config (plus extra INI text) and return its path."""
    counter = iter(range(1000))

    def write(extra="", seed=1, n=100_000, jitter=0, dark=0):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(IDEAL.format(seed=seed, n=n, jitter=jitter, dark=dark))
        cp.read_string(textwrap.dedent(extra))
        path = tmp_path / f"cfg{next(counter)}.ini"
        with open(path, "w") as fh:
            cp.write(fh)
        return path

    return write
