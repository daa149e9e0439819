"""Post-processing measured counts with the command-line tool.

Writes a counts file as a lab would produce it (here: expected counts of a
100 km link), then runs ``decoyqkd rate-from-counts`` and a short distance
scan from a configuration file. Everything goes to a temporary directory.
"""
import os
import tempfile

from decoyqkd import ChannelParams, SourceParams, expected_counts, simulate_rates
from decoyqkd.cli import run
from decoyqkd.config import write_counts

here = os.path.dirname(os.path.abspath(__file__))
source = SourceParams.with_vacuum()
channel = ChannelParams(100)

with tempfile.TemporaryDirectory() as tmp:
    counts = os.path.join(tmp, "counts.csv")
    write_counts(expected_counts(source, simulate_rates(source, channel), 1e11, channel.Y0),
                 counts)
    print(open(counts).read())
    print("rate-from-counts:")
    run(["rate-from-counts", "--counts", counts])

    out = os.path.join(tmp, "scan.csv")
    code = run(["scan", "--config", os.path.join(here, "table2.cfg"), "--out", out])
    print(f"\nscan exit code {code}; first rows:")
    print("".join(open(out).readlines()[:4]))
