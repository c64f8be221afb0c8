"""Built-in case data.

``CASE_2BUS_2GEN`` and ``CASE_3BUS_1GEN`` are the small systems used across
the docs and tests; ``CASE9`` and ``CASE14`` are the standard IEEE test
systems used as meshed seeds for radial instance generation.
"""

from __future__ import annotations

from .network import Network, parse_case

CASE_2BUS_2GEN = """\
function mpc = case2_two_gen
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3   75  -84.7  0  0  1  1  0  230  1  1.1  0.9;
    2  2  105   22.8  0  0  1  1  0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  300  -30  1  100  1  250  75;
    2  0  0  300  -30  1  100  1  300  70;
];
mpc.branch = [
    1  2  0.01008  0.0504  0  0  0  0  0  0  1;
];
mpc.gencost = [
    2  0  0  2  5.0  0;
    2  0  0  2  1.2  0;
];
"""

CASE_3BUS_1GEN = """\
function mpc = case3_one_gen
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  50  -52.3  0  0  1  1  0  230  1  1.1  0.9;
    2  1  70   14.1  0  0  1  1  0  230  1  1.1  0.9;
    3  1  60  -82.3  0  0  1  1  0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  500  -100  1  100  1  550  150;
];
mpc.branch = [
    1  2  0.01008  0.0504  0  0  0  0  0  0  1;
    2  3  0.07500  0.0840  0  0  0  0  0  0  1;
];
mpc.gencost = [
    2  0  0  2  5.0  0;
];
"""

CASE9 = """\
function mpc = case9
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3    0   0  0  0  1  1  0  345  1  1.1  0.9;
    2  2    0   0  0  0  1  1  0  345  1  1.1  0.9;
    3  2    0   0  0  0  1  1  0  345  1  1.1  0.9;
    4  1    0   0  0  0  1  1  0  345  1  1.1  0.9;
    5  1   90  30  0  0  1  1  0  345  1  1.1  0.9;
    6  1    0   0  0  0  1  1  0  345  1  1.1  0.9;
    7  1  100  35  0  0  1  1  0  345  1  1.1  0.9;
    8  1    0   0  0  0  1  1  0  345  1  1.1  0.9;
    9  1  125  50  0  0  1  1  0  345  1  1.1  0.9;
];
mpc.gen = [
    1   72.3   27.03  300  -300  1.040  100  1  250  10;
    2  163.0    6.54  300  -300  1.025  100  1  300  10;
    3   85.0  -10.95  300  -300  1.025  100  1  270  10;
];
mpc.branch = [
    1  4  0.0000  0.0576  0.000  250  250  250  0  0  1;
    4  5  0.0170  0.0920  0.158  250  250  250  0  0  1;
    5  6  0.0390  0.1700  0.358  150  150  150  0  0  1;
    3  6  0.0000  0.0586  0.000  300  300  300  0  0  1;
    6  7  0.0119  0.1008  0.209  150  150  150  0  0  1;
    7  8  0.0085  0.0720  0.149  250  250  250  0  0  1;
    8  2  0.0000  0.0625  0.000  250  250  250  0  0  1;
    8  9  0.0320  0.1610  0.306  250  250  250  0  0  1;
    9  4  0.0100  0.0850  0.176  250  250  250  0  0  1;
];
mpc.gencost = [
    2  1500  0  3  0.1100  5.0  150;
    2  2000  0  3  0.0850  1.2  600;
    2  3000  0  3  0.1225  1.0  335;
];
"""

CASE14 = """\
function mpc = case14
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0.0   0.0  0   0  1  1.060    0.00  0  1  1.06  0.94;
    2   2  21.7  12.7  0   0  1  1.045   -4.98  0  1  1.06  0.94;
    3   2  94.2  19.0  0   0  1  1.010  -12.72  0  1  1.06  0.94;
    4   1  47.8  -3.9  0   0  1  1.019  -10.33  0  1  1.06  0.94;
    5   1   7.6   1.6  0   0  1  1.020   -8.78  0  1  1.06  0.94;
    6   2  11.2   7.5  0   0  1  1.070  -14.22  0  1  1.06  0.94;
    7   1   0.0   0.0  0   0  1  1.062  -13.37  0  1  1.06  0.94;
    8   2   0.0   0.0  0   0  1  1.090  -13.36  0  1  1.06  0.94;
    9   1  29.5  16.6  0  19  1  1.056  -14.94  0  1  1.06  0.94;
    10  1   9.0   5.8  0   0  1  1.051  -15.10  0  1  1.06  0.94;
    11  1   3.5   1.8  0   0  1  1.057  -14.79  0  1  1.06  0.94;
    12  1   6.1   1.6  0   0  1  1.055  -15.07  0  1  1.06  0.94;
    13  1  13.5   5.8  0   0  1  1.050  -15.16  0  1  1.06  0.94;
    14  1  14.9   5.0  0   0  1  1.036  -16.04  0  1  1.06  0.94;
];
mpc.gen = [
    1  232.4  -16.9  10   0   1.060  100  1  332.4  0;
    2   40.0   42.4  50  -40  1.045  100  1  140.0  0;
    3    0.0   23.4  40   0   1.010  100  1  100.0  0;
    6    0.0   12.2  24  -6   1.070  100  1  100.0  0;
    8    0.0   17.4  24  -6   1.090  100  1  100.0  0;
];
mpc.branch = [
    1   2  0.01938  0.05917  0.0528  9900  0  0  0      0  1;
    1   5  0.05403  0.22304  0.0492  9900  0  0  0      0  1;
    2   3  0.04699  0.19797  0.0438  9900  0  0  0      0  1;
    2   4  0.05811  0.17632  0.0340  9900  0  0  0      0  1;
    2   5  0.05695  0.17388  0.0346  9900  0  0  0      0  1;
    3   4  0.06701  0.17103  0.0128  9900  0  0  0      0  1;
    4   5  0.01335  0.04211  0.0000  9900  0  0  0      0  1;
    4   7  0.00000  0.20912  0.0000  9900  0  0  0.978  0  1;
    4   9  0.00000  0.55618  0.0000  9900  0  0  0.969  0  1;
    5   6  0.00000  0.25202  0.0000  9900  0  0  0.932  0  1;
    6  11  0.09498  0.19890  0.0000  9900  0  0  0      0  1;
    6  12  0.12291  0.25581  0.0000  9900  0  0  0      0  1;
    6  13  0.06615  0.13027  0.0000  9900  0  0  0      0  1;
    7   8  0.00000  0.17615  0.0000  9900  0  0  0      0  1;
    7   9  0.00000  0.11001  0.0000  9900  0  0  0      0  1;
    9  10  0.03181  0.08450  0.0000  9900  0  0  0      0  1;
    9  14  0.12711  0.27038  0.0000  9900  0  0  0      0  1;
    10 11  0.08205  0.19207  0.0000  9900  0  0  0      0  1;
    12 13  0.22092  0.19988  0.0000  9900  0  0  0      0  1;
    13 14  0.17093  0.34802  0.0000  9900  0  0  0      0  1;
];
mpc.gencost = [
    2  0  0  3  0.0430293  20.0  0;
    2  0  0  3  0.2500000  20.0  0;
    2  0  0  3  0.0100000  40.0  0;
    2  0  0  3  0.0100000  40.0  0;
    2  0  0  3  0.0100000  40.0  0;
];
"""

_ALL = {
    "case2_two_gen": CASE_2BUS_2GEN,
    "case3_one_gen": CASE_3BUS_1GEN,
    "case9": CASE9,
    "case14": CASE14,
}


def case_text(name: str) -> str:
    try:
        return _ALL[name]
    except KeyError:
        raise KeyError(f"unknown built-in case {name!r}; have {sorted(_ALL)}") from None


def load_case(name: str, **kwargs) -> Network:
    return parse_case(case_text(name), name=name, **kwargs)
