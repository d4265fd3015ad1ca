import numpy as np
import pytest

from solg.netlist import Netlist, NetlistError, format_netlist, parse_netlist

EXAMPLE = """\
# tiny example: solve for inputs of an OR whose output is high
param r_on 0.05
in OUT 1
or A B OUT
probe A
probe B
"""


def test_parse_docstring_example():
    nl = parse_netlist(EXAMPLE)
    assert nl.params == {"r_on": 0.05}
    assert nl.inputs == [("OUT", True)]
    assert nl.gates == [("or", "A", "B", "OUT")]
    assert nl.probes == ["A", "B"]


def test_comments_blank_lines_and_inline_comments():
    nl = parse_netlist("\n  # full comment\nor A B O  # trailing\n\n")
    assert nl.gates == [("or", "A", "B", "O")]


def test_to_circuit_applies_params_and_overrides():
    nl = parse_netlist("param r_on 0.2\nin O 0\nand A B O\n")
    c = nl.to_circuit()
    assert c.params.r_on == 0.2
    assert c.clamp_volts() == {c.node_id("O"): -1.0}
    c2 = nl.to_circuit({"r_on": 0.3, "v_c": 2.0})
    assert c2.params.r_on == 0.3
    assert c2.params.v_c == 2.0


def _err(text: str) -> NetlistError:
    with pytest.raises(NetlistError) as info:
        parse_netlist(text)
    return info.value


def test_unknown_directive_position():
    e = _err("or A B O\n  bogus A\n")
    assert (e.line, e.col) == (2, 3)
    assert "bogus" in str(e)
    assert str(e).startswith("line 2, col 3:")


def test_param_errors():
    assert "takes a name and a value" in str(_err("param r_on\n"))
    e = _err("param nope 3\n")
    assert (e.line, e.col) == (1, 7)
    e = _err("param r_on abc\n")
    assert (e.line, e.col) == (1, 12)
    e = _err("param r_on 1\nparam r_on 2\n")
    assert (e.line, e.col) == (2, 7)
    assert "duplicate" in str(e)


def test_in_errors():
    assert "takes a node" in str(_err("in O\n"))
    e = _err("in O 2\n")
    assert (e.line, e.col) == (1, 6)
    e = _err("in O 1\nin O 0\n")
    assert e.line == 2
    assert "already clamped on line 1" in str(e)
    # +/- are word characters (needed for numbers) but not legal in node names
    e = _err("in A+B 1\n")
    assert "bad node name" in str(e)


def test_gate_errors():
    e = _err("and A B\n")
    assert "three nodes" in str(e)
    e = _err("xor A B+ O\n")
    assert (e.line, e.col) == (1, 7)


def test_probe_errors():
    assert "one node" in str(_err("probe A B\n"))
    assert "bad node name" in str(_err("probe A-\n"))


def test_format_round_trip_fixed_point():
    nl = parse_netlist(EXAMPLE)
    text = format_netlist(nl)
    again = format_netlist(parse_netlist(text))
    assert text == again


def test_format_empty_netlist():
    assert format_netlist(Netlist()) == ""


def test_round_trip_random_corpus():
    # Random values survive the format/parse cycle bit-exactly because floats
    # are rendered with repr.
    rng = np.random.default_rng(7)
    names = ("r_on", "r_off", "alpha", "q", "gamma", "v_c", "i_max")
    for _ in range(25):
        nl = Netlist()
        for name in rng.choice(names, size=rng.integers(0, 5), replace=False):
            nl.params[str(name)] = float(rng.uniform(1e-9, 1e3))
        n_gates = int(rng.integers(1, 5))
        for g in range(n_gates):
            kind = ("and", "or", "xor")[int(rng.integers(3))]
            nl.gates.append((kind, f"N{3 * g}", f"N{3 * g + 1}", f"N{3 * g + 2}"))
        nl.inputs.append((f"N{int(rng.integers(3 * n_gates))}", bool(rng.integers(2))))
        nl.probes.append("N0")
        text = format_netlist(nl)
        back = parse_netlist(text)
        assert back == nl
        assert format_netlist(back) == text


def test_round_trip_preserves_float_bits():
    nl = Netlist(params={"alpha": 60.000000000000014})
    assert parse_netlist(format_netlist(nl)).params["alpha"] == 60.000000000000014
