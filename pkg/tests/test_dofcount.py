import json

import pytest

from driftham import dofcount as dc


def test_builtin_fixture_counts():
    assert dc.dof(dc.builtin("cotton")) == 6
    assert dc.dof(dc.builtin("einstein-linear")) == 4
    assert dc.dof(dc.builtin("central-field")) == 5
    assert dc.dof(dc.builtin("central-field-multiplier")) == 6


def test_empty_table():
    assert dc.dof(dc.InvolutiveTable("empty")) == 0


def test_single_ode_of_order_n():
    for n in (1, 2, 5):
        assert dc.dof(dc.InvolutiveTable("ode", equations={n: 1})) == n


def test_symmetries_and_identities_subtract_with_alternating_sign():
    table = dc.InvolutiveTable(
        "alt",
        equations={2: 3},
        identities={(3, 0): 1, (2, 1): 1},
        symmetries={(1, 0): 1})
    # 2*3 - (3 - 2 + 1) = 4
    assert dc.dof(table) == 4


def test_combine_is_additive():
    a = dc.builtin("central-field")
    b = dc.builtin("central-field-multiplier")
    both = dc.combine("both", a, b)
    assert dc.dof(both) == dc.dof(a) + dc.dof(b)


def test_builtin_names_and_unknown():
    names = dc.builtin_names()
    assert {"cotton", "einstein-linear", "central-field",
            "central-field-multiplier"} <= set(names)
    with pytest.raises(dc.DofError):
        dc.builtin("no-such-table")


def test_load_from_file(tmp_path):
    payload = {
        "label": "user",
        "equations": {"2": 1},
        "identities": [],
        "symmetries": [{"order": 1, "reducibility": 0, "count": 1}],
    }
    path = tmp_path / "user.json"
    path.write_text(json.dumps(payload))
    assert dc.dof(dc.load(str(path))) == 1


def test_invalid_tables_rejected():
    with pytest.raises(dc.DofError):
        dc.InvolutiveTable("bad", equations={-1: 1})
    with pytest.raises(dc.DofError):
        dc.InvolutiveTable("bad", equations={2: -3})
    with pytest.raises(dc.DofError):
        dc.InvolutiveTable("bad", identities={(1, -2): 1})
